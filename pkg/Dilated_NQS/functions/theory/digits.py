"""
Digit sums and minimal dilated paths.

With recurrent jumps {1, B, B^2, ...} the fewest jumps that cover a displacement m is
the base-B digit sum s_B(m). The BFS table here computes that minimum directly, as an
independent check.
"""

from collections import deque
from fractions import Fraction

from errors import InvalidInputError, ResourceError

MAX_AVERAGE_RANGE = 2 ** 24


def _check_base(base):
    if int(base) != base or base < 2:
        raise InvalidInputError(f"base must be an integer >= 2, got {base}")


def digit_sum(m, base=2):
    """Sum of the base-`base` digits of m >= 0; digit_sum(0) = 0."""
    _check_base(base)
    if m < 0:
        raise InvalidInputError(f"digit_sum needs m >= 0, got {m}")
    total = 0
    while m:
        m, digit = divmod(m, base)
        total += digit
    return total


def jump_sizes(base, depth, limit):
    """Strides B^0 .. B^(depth-1) that do not exceed `limit` (all of them if depth is None)."""
    sizes, stride = [], 1
    while stride <= limit and (depth is None or len(sizes) < depth):
        sizes.append(stride)
        stride *= base
    return sizes


def lmin_table(m_max, base=2, depth=None):
    """
        Shortest jump count to every displacement 0..m_max, by breadth-first search.

        Parameters:
            m_max (int): largest displacement.
            base (int): dilation base B.
            depth (int | None): number of layers L; jumps are B^0 .. B^(L-1).

        Returns:
            list: entry m is the minimal number of jumps summing to m.
    """
    _check_base(base)
    if depth is not None and depth < 1:
        raise InvalidInputError(f"depth must be >= 1, got {depth}")
    jumps = jump_sizes(base, depth, max(m_max, 1))
    dist = [None] * (m_max + 1)
    dist[0] = 0
    queue = deque([0])
    while queue:
        here = queue.popleft()
        for jump in jumps:
            there = here + jump
            if there <= m_max and dist[there] is None:
                dist[there] = dist[here] + 1
                queue.append(there)
    return dist


def lmin_bfs_oracle(m, base=2, depth=None):
    """Minimal number of recurrent jumps covering displacement m >= 1."""
    if m < 1:
        raise InvalidInputError(f"lmin_bfs_oracle needs m >= 1, got {m}")
    return lmin_table(m, base, depth)[m]


def worst_case_digit_sum(m, base=2):
    """Upper bound (B - 1)(floor(log_B m) + 1) on s_B(m) for m >= 1."""
    _check_base(base)
    if m < 1:
        raise InvalidInputError(f"worst_case_digit_sum needs m >= 1, got {m}")
    exponent, reach = 0, base
    while reach <= m:
        reach *= base
        exponent += 1
    return (base - 1) * (exponent + 1)


def box_maximum(R, base=2):
    """
        Largest digit sum over [0, B^(R+1)) and where it is attained.

        Returns:
            (int, int, int): observed maximum, its argmax, and (B - 1)(R + 1).
    """
    _check_base(base)
    top = base ** (R + 1)
    if top > MAX_AVERAGE_RANGE:
        raise ResourceError(f"B^(R+1) = {top} exceeds the enumeration limit {MAX_AVERAGE_RANGE}")
    best, where = -1, 0
    for m in range(top):
        s = digit_sum(m, base)
        if s > best:
            best, where = s, m
    return best, where, (base - 1) * (R + 1)


def average_digit_sum_check(R, base=2):
    """
        Exact mean of s_B over [0, B^(R+1)) against the closed form (B - 1)(R + 1) / 2.

        Returns:
            (Fraction, Fraction): the enumerated mean and the closed form.
    """
    _check_base(base)
    top = base ** (R + 1)
    if top > MAX_AVERAGE_RANGE:
        raise ResourceError(f"B^(R+1) = {top} exceeds the enumeration limit {MAX_AVERAGE_RANGE}")
    total = sum(digit_sum(m, base) for m in range(top))
    return Fraction(total, top), Fraction((base - 1) * (R + 1), 2)
