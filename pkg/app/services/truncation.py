"""LI (level-increment) truncation: jumps larger than N are lumped at exactly N"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.errors import InvalidSpec, PreconditionViolation
from app.services.linalg import Matrix
from app.services.model import MG1Spec, block_at, make_sequence, tail_sum_bar, validate_spec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TruncatedSpec:
    """
    The finite-support chain P^(N).

    ``spec`` is an ordinary MG1Spec without tails whose A blocks run over
    -1..N and whose B blocks run over 0..N, so it serializes like any other
    chain file.
    """
    N: int
    spec: MG1Spec

    @property
    def M0(self) -> int:
        return self.spec.M0

    @property
    def M1(self) -> int:
        return self.spec.M1

    @property
    def B_minus1(self) -> Matrix:
        return self.spec.B_minus1

    @cached_property
    def A_stack(self) -> np.ndarray:
        """A^(N)(k) for k = -1..N, stacked so A_stack[k + 1] is A^(N)(k)"""
        stack = np.stack([block_at(self.spec.Aseq, k) for k in range(-1, self.N + 1)])
        stack.setflags(write=False)
        return stack

    @cached_property
    def B0(self) -> Matrix:
        return block_at(self.spec.Bseq, 0)

    @cached_property
    def B_up(self) -> np.ndarray:
        """B^(N)(k) for k = 1..N, stacked so B_up[k - 1] is B^(N)(k)"""
        stack = np.stack([block_at(self.spec.Bseq, k) for k in range(1, self.N + 1)])
        stack.setflags(write=False)
        return stack


def li_truncate(spec: MG1Spec, N: int) -> TruncatedSpec:
    """
    Build P^(N): A^(N)(k) = A(k) for k <= N-1, A^(N)(N) = Abar(N-1), zero beyond; same for B.

    The lumped block is the exact tail mass, so row sums are preserved.
    """
    if N < 1:
        raise PreconditionViolation(f"truncation level N must be >= 1, got {N}")
    violations = validate_spec(spec)
    if violations:
        raise InvalidSpec("; ".join(str(v) for v in violations))

    A_blocks = [block_at(spec.Aseq, k) for k in range(-1, N)]
    A_blocks.append(tail_sum_bar(spec.Aseq, N - 1))
    B_blocks = [block_at(spec.Bseq, k) for k in range(0, N)]
    B_blocks.append(tail_sum_bar(spec.Bseq, N - 1))

    truncated = MG1Spec(
        M0=spec.M0,
        M1=spec.M1,
        B_minus1=spec.B_minus1,
        Bseq=make_sequence("B", spec.M0, spec.M1, B_blocks),
        Aseq=make_sequence("A", spec.M0, spec.M1, A_blocks),
    )
    violations = validate_spec(truncated)
    if violations:
        raise InvalidSpec(f"truncation at N={N} is not a valid chain: " + "; ".join(str(v) for v in violations))

    logger.debug(f"LI truncation at N={N}: lumped A mass {float(A_blocks[-1].sum()):.3e}")
    return TruncatedSpec(N=N, spec=truncated)


__all__ = ["TruncatedSpec", "li_truncate"]
