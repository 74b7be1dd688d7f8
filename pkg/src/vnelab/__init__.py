"""Virtual network embedding laboratory.

Substrate and request modeling, QoS- and security-aware embedding engines,
and a deterministic event simulation that measures long-term revenue, cost,
and acceptance behaviour.
"""

__version__ = "0.1.0"
