"""Translation edit rate between an MT hypothesis and a (pseudo-)reference.

Two views of the same comparison are provided:

* :func:`levenshtein_align` gives the shift-free, monotone edit script that
  word-level tagging is derived from;
* :func:`ter_score` runs the tercom-style greedy block-shift search on top of
  it and supplies the counts used for sentence-level HTER.

Op naming follows the hyp->ref direction: ``Ins`` is a surplus hypothesis
token (it would have to be removed), ``Del`` a reference token the hypothesis
is missing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union


class Match(NamedTuple):
    hyp_idx: int
    ref_idx: int


class Sub(NamedTuple):
    hyp_idx: int
    ref_idx: int


class Ins(NamedTuple):
    hyp_idx: int


class Del(NamedTuple):
    ref_idx: int


class Shift(NamedTuple):
    block_start: int
    block_len: int
    dest_pos: int

    @property
    def displacement(self) -> int:
        return abs(self.dest_pos - self.block_start)


EditOp = Union[Match, Sub, Ins, Del, Shift]


@dataclass(frozen=True)
class ShiftParams:
    max_shift_size: int = 10
    max_shift_dist: int = 50
    enabled: bool = True

    def to_dict(self) -> dict:
        return {
            "max_shift_size": self.max_shift_size,
            "max_shift_dist": self.max_shift_dist,
            "enabled": self.enabled,
        }


@dataclass
class TerResult:
    num_sub: int
    num_ins: int
    num_del: int
    num_shift: int
    ref_len: int
    script: list = field(default_factory=list)
    hyp_order: list = field(default_factory=list)

    @property
    def total_edits(self) -> int:
        return self.num_sub + self.num_ins + self.num_del + self.num_shift

    @property
    def shifts(self) -> list[Shift]:
        return [op for op in self.script if isinstance(op, Shift)]

    @property
    def monotone_script(self) -> list:
        return [op for op in self.script if not isinstance(op, Shift)]


def _dp_table(hyp: Sequence[str], ref: Sequence[str]) -> list[list[int]]:
    n, m = len(hyp), len(ref)
    prev = list(range(m + 1))
    table = [prev]
    for i in range(1, n + 1):
        h = hyp[i - 1]
        row = [i] + [0] * m
        for j in range(1, m + 1):
            diag = prev[j - 1] + (h != ref[j - 1])
            up = prev[j] + 1
            left = row[j - 1] + 1
            row[j] = min(diag, up, left)
        table.append(row)
        prev = row
    return table


def edit_distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Shift-free edit distance without building the script."""
    if len(hyp) < len(ref):
        hyp, ref = ref, hyp
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, 1):
        cur = [i]
        for j, r in enumerate(ref, 1):
            cur.append(min(prev[j - 1] + (h != r), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def levenshtein_align(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, list]:
    """Minimal unit-cost edit script turning ``hyp`` into ``ref``.

    The backtrace starts at the bottom-right cell and prefers Match, then
    Sub, then Del, then Ins, so the script is fully deterministic.
    """
    d = _dp_table(hyp, ref)
    i, j = len(hyp), len(ref)
    cost = d[i][j]
    ops: list = []
    while i > 0 or j > 0:
        cur = d[i][j]
        if i > 0 and j > 0:
            if hyp[i - 1] == ref[j - 1] and d[i - 1][j - 1] == cur:
                ops.append(Match(i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if d[i - 1][j - 1] + 1 == cur:
                ops.append(Sub(i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if j > 0 and d[i][j - 1] + 1 == cur:
            ops.append(Del(j - 1))
            j -= 1
            continue
        ops.append(Ins(i - 1))
        i -= 1
    ops.reverse()
    return cost, ops


def apply_shift(seq: Sequence, shift: Shift) -> list:
    """Move ``seq[block_start:block_start+block_len]`` so it starts at ``dest_pos``.

    ``dest_pos`` indexes the resulting sequence.
    """
    s, ln = shift.block_start, shift.block_len
    block = list(seq[s:s + ln])
    rest = list(seq[:s]) + list(seq[s + ln:])
    return rest[:shift.dest_pos] + block + rest[shift.dest_pos:]


def _hyp_boundaries(script: list, ref_len: int) -> list[int]:
    """For each ref index, the number of hyp tokens consumed before its op."""
    bounds = [0] * ref_len
    consumed = 0
    for op in script:
        if isinstance(op, (Match, Sub)):
            bounds[op.ref_idx] = consumed
            consumed += 1
        elif isinstance(op, Del):
            bounds[op.ref_idx] = consumed
        else:
            consumed += 1
    return bounds


def _candidate_shifts(hyp: Sequence[str], ref: Sequence[str], script: list,
                      params: ShiftParams) -> list[Shift]:
    n = len(hyp)
    matched = [False] * n
    for op in script:
        if isinstance(op, Match):
            matched[op.hyp_idx] = True
    bounds = _hyp_boundaries(script, len(ref))

    ref_spans: dict[tuple, list[int]] = {}
    for r in range(len(ref)):
        for ln in range(1, min(params.max_shift_size, len(ref) - r) + 1):
            ref_spans.setdefault(tuple(ref[r:r + ln]), []).append(r)

    out = set()
    for s in range(n):
        for ln in range(1, min(params.max_shift_size, n - s) + 1):
            block = tuple(hyp[s:s + ln])
            starts = ref_spans.get(block)
            if starts is None:
                break  # longer blocks cannot match either
            if all(matched[s:s + ln]):
                continue
            for r in starts:
                target = bounds[r]
                # target is a hyp boundary before removal of the block
                if s <= target <= s + ln:
                    continue
                dest = target if target < s else target - ln
                if dest == s or abs(dest - s) > params.max_shift_dist:
                    continue
                out.add(Shift(s, ln, dest))
    return sorted(out)


def find_best_shift(hyp: Sequence[str], ref: Sequence[str],
                    params: ShiftParams = ShiftParams(),
                    script: list | None = None) -> tuple[Shift, int] | None:
    """Best single block shift, or ``None`` if no shift lowers the cost.

    A block is eligible when it matches a contiguous ref span, is not already
    fully Match-aligned, and moving it lands it at the hyp boundary the
    current script aligns with the start of that span. Ties go to lower
    cost, then leftmost start, shorter block, smaller displacement.
    """
    if script is None:
        cur_cost, script = levenshtein_align(hyp, ref)
    else:
        cur_cost = sum(1 for op in script if not isinstance(op, Match))
    if cur_cost == 0:
        return None
    best = None
    best_key = None
    for sh in _candidate_shifts(hyp, ref, script, params):
        cost = edit_distance(apply_shift(hyp, sh), ref)
        key = (cost, sh.block_start, sh.block_len, sh.displacement, sh.dest_pos)
        if best_key is None or key < best_key:
            best, best_key = sh, key
    if best is None or best_key[0] >= cur_cost:
        return None
    return best, best_key[0]


def ter_score(hyp: Sequence[str], ref: Sequence[str],
              params: ShiftParams = ShiftParams()) -> TerResult:
    hyp = list(hyp)
    order = list(range(len(hyp)))
    shifts: list[Shift] = []
    cost, script = levenshtein_align(hyp, ref)
    if params.enabled:
        while True:
            found = find_best_shift(hyp, ref, params, script)
            if found is None:
                break
            sh, _ = found
            shifts.append(sh)
            hyp = apply_shift(hyp, sh)
            order = apply_shift(order, sh)
            cost, script = levenshtein_align(hyp, ref)
    counts = {Sub: 0, Ins: 0, Del: 0, Match: 0}
    for op in script:
        counts[type(op)] += 1
    return TerResult(
        num_sub=counts[Sub],
        num_ins=counts[Ins],
        num_del=counts[Del],
        num_shift=len(shifts),
        ref_len=len(ref),
        script=[*shifts, *script],
        hyp_order=order,
    )


def hter(result: TerResult, clip: bool = False) -> float:
    score = result.total_edits / max(1, result.ref_len)
    if clip:
        score = min(score, 1.0)
    return score
