# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LZ76 phrase counter; same contract as ``lz_py.lz76_phrase_count``."""

from libc.stdlib cimport malloc, free


cdef struct Automaton:
    int *link
    int *length
    int *head        # first outgoing edge per state, -1 if none
    int *edge_next
    int *edge_to
    int *edge_from
    unsigned char *edge_sym
    int *table       # open addressing: (state, symbol) -> edge, -1 if empty
    Py_ssize_t table_mask
    int n_states
    int n_edges
    int cap_edges
    int last


cdef inline Py_ssize_t slot_of(Automaton *a, int state, unsigned char c) nogil:
    cdef unsigned long long key = (<unsigned long long> state) * 256 + c
    return <Py_ssize_t> ((key * 11400714819323198485ULL) >> 20) & a.table_mask


cdef inline int find_edge(Automaton *a, int state, unsigned char c) nogil:
    cdef Py_ssize_t i = slot_of(a, state, c)
    cdef int e
    while True:
        e = a.table[i]
        if e == -1:
            return -1
        if a.edge_sym[e] == c and a.edge_from[e] == state:
            return e
        i = (i + 1) & a.table_mask


cdef int add_edge(Automaton *a, int state, unsigned char c, int target) nogil:
    cdef int e
    cdef Py_ssize_t i
    if a.n_edges == a.cap_edges:
        return -1
    e = a.n_edges
    a.n_edges += 1
    a.edge_sym[e] = c
    a.edge_to[e] = target
    a.edge_from[e] = state
    a.edge_next[e] = a.head[state]
    a.head[state] = e
    i = slot_of(a, state, c)
    while a.table[i] != -1:
        i = (i + 1) & a.table_mask
    a.table[i] = e
    return 0


cdef int extend(Automaton *a, unsigned char c) nogil:
    cdef int cur = a.n_states
    cdef int p, q, clone, e, qe
    a.n_states += 1
    a.length[cur] = a.length[a.last] + 1
    a.link[cur] = 0
    a.head[cur] = -1
    p = a.last
    while p != -1:
        e = find_edge(a, p, c)
        if e != -1:
            break
        if add_edge(a, p, c, cur) < 0:
            return -1
        p = a.link[p]
    if p != -1:
        q = a.edge_to[e]
        if a.length[p] + 1 == a.length[q]:
            a.link[cur] = q
        else:
            clone = a.n_states
            a.n_states += 1
            a.length[clone] = a.length[p] + 1
            a.link[clone] = a.link[q]
            a.head[clone] = -1
            qe = a.head[q]
            while qe != -1:
                if add_edge(a, clone, a.edge_sym[qe], a.edge_to[qe]) < 0:
                    return -1
                qe = a.edge_next[qe]
            while p != -1:
                e = find_edge(a, p, c)
                if e == -1 or a.edge_to[e] != q:
                    break
                a.edge_to[e] = clone
                p = a.link[p]
            a.link[q] = clone
            a.link[cur] = clone
    a.last = cur
    return 0


cdef void _release(Automaton *a):
    free(a.link); free(a.length); free(a.head)
    free(a.edge_next); free(a.edge_to); free(a.edge_from); free(a.edge_sym)
    free(a.table)


def lz76_phrase_count(data):
    """Number of phrases in the LZ76 (Kaspar-Schuster) parsing of ``data``."""
    cdef bytes buf = bytes(data)
    cdef const unsigned char *s = buf
    cdef Py_ssize_t n = len(buf)
    cdef Automaton a
    cdef Py_ssize_t pos = 0, match, built = 0
    cdef long count = 0
    cdef int state, e, failed = 0
    cdef Py_ssize_t table_size = 1, k
    a.link = NULL; a.length = NULL; a.head = NULL; a.edge_next = NULL
    a.edge_to = NULL; a.edge_from = NULL; a.edge_sym = NULL; a.table = NULL
    if n == 0:
        return 0
    if n > 1000000000:
        raise ValueError("input too long for 32-bit automaton indices")

    a.link = <int *> malloc((2 * n + 2) * sizeof(int))
    a.length = <int *> malloc((2 * n + 2) * sizeof(int))
    a.head = <int *> malloc((2 * n + 2) * sizeof(int))
    # a suffix automaton of n symbols has at most 3n - 4 transitions
    a.cap_edges = 3 * n + 16
    while table_size < 2 * a.cap_edges:
        table_size *= 2
    a.table_mask = table_size - 1
    a.edge_next = <int *> malloc(a.cap_edges * sizeof(int))
    a.edge_to = <int *> malloc(a.cap_edges * sizeof(int))
    a.edge_from = <int *> malloc(a.cap_edges * sizeof(int))
    a.edge_sym = <unsigned char *> malloc(a.cap_edges)
    a.table = <int *> malloc(table_size * sizeof(int))
    if (a.link == NULL or a.length == NULL or a.head == NULL or a.edge_next == NULL
            or a.edge_to == NULL or a.edge_from == NULL or a.edge_sym == NULL
            or a.table == NULL):
        _release(&a)
        raise MemoryError()
    for k in range(table_size):
        a.table[k] = -1
    a.link[0] = -1
    a.length[0] = 0
    a.head[0] = -1
    a.n_states = 1
    a.n_edges = 0
    a.last = 0

    with nogil:
        while pos < n:
            state = 0
            match = 0
            while True:
                if pos + match >= n:
                    break
                while built < pos + match:
                    if extend(&a, s[built]) < 0:
                        failed = 1
                        break
                    built += 1
                if failed:
                    break
                while state != 0 and a.length[a.link[state]] >= match:
                    state = a.link[state]
                e = find_edge(&a, state, s[pos + match])
                if e == -1:
                    break
                state = a.edge_to[e]
                match += 1
            if failed:
                break
            count += 1
            pos += match + 1

    _release(&a)
    if failed:
        raise MemoryError()
    return count
