"""Independent relay-net evaluator used as a test oracle.

Works on the parsed net directly (no B0): every coil is recomputed from the
current signal values until nothing changes.  For an acyclic net this
settles on the unique consistent assignment.
"""

import itertools

from safeplc.relay import Contact, Latch, Series


def _value(e, env):
    if isinstance(e, Contact):
        return env[e.name] if e.normally_open else not env[e.name]
    if isinstance(e, Series):
        return _value(e.left, env) and _value(e.right, env)
    return _value(e.left, env) or _value(e.right, env)


def settle(net, held, inputs):
    """One scan of ``net``: ``held`` maps relays/outputs to their previous
    values.  Returns the new values of all relays and outputs."""
    env = dict(held)
    env.update(inputs)
    for _ in range(len(net.definitions) + 2):
        changed = False
        for d in net.definitions:
            if isinstance(d, Latch):
                new = (held[d.relay] or _value(d.set, env)) and not _value(d.reset, env)
                name = d.relay
            else:
                new = _value(d.expr, env)
                name = d.coil
            if env[name] != new:
                env[name] = new
                changed = True
        if not changed:
            return {n: env[n] for n in net.relays + net.outputs}
    raise AssertionError("relay net did not settle")


def all_inputs(net):
    for bits in itertools.product((False, True), repeat=len(net.inputs)):
        yield dict(zip(net.inputs, bits))


def reachable(net):
    """All relay/output valuations reachable from the all-open start."""
    start = {n: False for n in net.relays + net.outputs}
    key = lambda s: tuple(sorted(s.items()))
    seen = {key(start): start}
    todo = [start]
    while todo:
        s = todo.pop()
        for i in all_inputs(net):
            post = settle(net, s, i)
            if key(post) not in seen:
                seen[key(post)] = post
                todo.append(post)
    return list(seen.values())
