"""Naive re-trace of the grammar walk used to flag procedural errors.

Written against plain dicts of lists so it shares no code with the package.
Returns the flagged gesture groups in order of occurrence.
"""


def naive_flags(edges, transcript):
    succ = {}
    for src, dst in edges:
        succ.setdefault(src, [])
        if dst not in succ[src]:
            succ[src].append(dst)
    vertices = set()
    for src, dst in edges:
        if src != "START":
            vertices.add(src)
        vertices.add(dst)

    flagged = []
    expected = list(succ.get("START", []))
    previous = None
    for idx in range(len(transcript)):
        current = transcript[idx]
        if current not in vertices:
            flagged.append([current])
            if idx + 1 < len(transcript):
                expected = [transcript[idx + 1]]
            else:
                expected = []
        else:
            if current not in expected:
                flagged.append(["START" if previous is None else previous, current])
            expected = list(succ.get(current, []))
        previous = current
    return flagged
