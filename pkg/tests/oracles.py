"""Independent reference implementations used by the tests."""
import numpy as np

MINUTES = 24 * 60


def minute_timeline(insertions):
    """Brute-force resolver: one slot per minute, the latest insertion covering a minute owns it.

    ``insertions`` is a list of (start_minute, end_minute, label); returns an int array with -1 for
    minutes nobody covers.
    """
    line = np.full(MINUTES, -1, dtype=np.int64)
    for a, b, label in insertions:
        line[a:b] = label
    return line


def agenda_timeline(tasks, label_of):
    """Minute-resolution view of an agenda, for comparison with :func:`minute_timeline`."""
    line = np.full(MINUTES, -1, dtype=np.int64)
    for t in tasks:
        a, b = t.t0 / 60.0, t.t1 / 60.0
        assert a == int(a) and b == int(b), "oracle only handles whole minutes"
        assert (line[int(a):int(b)] == -1).all(), "agenda tasks overlap"
        line[int(a):int(b)] = label_of(t)
    return line
