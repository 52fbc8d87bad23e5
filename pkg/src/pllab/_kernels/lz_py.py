"""Pure-Python LZ76 phrase counter (fallback for the compiled kernel)."""


def lz76_phrase_count(data: bytes) -> int:
    """Number of phrases in the LZ76 (Kaspar-Schuster) parsing of ``data``.

    Each phrase is the longest prefix of the remaining input that already
    occurs starting at an earlier position (overlap allowed), plus one new
    symbol. A trailing phrase cut short by the end of input counts as one.

    A suffix automaton of the consumed prefix is grown online, so the
    whole parse is linear in ``len(data)``.
    """
    data = bytes(data)
    n = len(data)
    if n == 0:
        return 0

    # suffix automaton: per-state transition dict, suffix link, longest length
    nxt = [{}]
    link = [-1]
    length = [0]
    last = 0
    built = 0

    def extend(c):
        nonlocal last
        cur = len(length)
        nxt.append({})
        link.append(0)
        length.append(length[last] + 1)
        p = last
        while p != -1 and c not in nxt[p]:
            nxt[p][c] = cur
            p = link[p]
        if p != -1:
            q = nxt[p][c]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = len(length)
                nxt.append(dict(nxt[q]))
                link.append(link[q])
                length.append(length[p] + 1)
                while p != -1 and nxt[p].get(c) == q:
                    nxt[p][c] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        last = cur

    count = 0
    pos = 0
    while pos < n:
        state = 0
        match = 0
        while True:
            if pos + match >= n:
                # input exhausted inside a phrase
                count += 1
                return count
            # the candidate must occur in data[:pos + match]
            while built < pos + match:
                extend(data[built])
                built += 1
            while state != 0 and length[link[state]] >= match:
                state = link[state]
            target = nxt[state].get(data[pos + match])
            if target is None:
                break
            state = target
            match += 1
        count += 1
        pos += match + 1
    return count
