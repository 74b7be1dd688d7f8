"""Shared builders for compact test networks and requests.

Defaults are maximally permissive (low substrate levels, high virtual
bounds) so a test only has to name the attribute it is exercising.
"""

from vnelab.network import (
    SubstrateLink,
    SubstrateNode,
    SubstrateNetwork,
    VirtualLink,
    VirtualNode,
    VirtualNetworkRequest,
)


def snode(nid, cpu=100, delay=1, security=3, remaining=None):
    return SubstrateNode(nid, cpu, delay, security, remaining)


def slink(a, b, bw=100, delay=1, remaining=None):
    return SubstrateLink((a, b), bw, delay, remaining)


def vnode(vid, cpu=1, delay=3, security=1):
    return VirtualNode(vid, cpu, delay, security)


def vlink(a, b, bw=1, delay=3):
    return VirtualLink((a, b), bw, delay)


def vnr(rid=0, nodes=(), links=(), arrival=0.0, lifetime=100.0):
    return VirtualNetworkRequest(rid, list(nodes), list(links), arrival, lifetime)


def build_net(nodes, links):
    return SubstrateNetwork(nodes, links)


def path_net(count, cpu=100, bw=100):
    """Substrate nodes 0..count-1 chained in a line."""
    nodes = [snode(i, cpu=cpu) for i in range(count)]
    links = [slink(i, i + 1, bw=bw) for i in range(count - 1)]
    return SubstrateNetwork(nodes, links)
