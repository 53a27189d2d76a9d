"""Chain builders shared by the tests"""

from pathlib import Path

from app.models.schemas import ChainSpecSchema
from app.services.model import MG1Spec, PowerTailModel, make_sequence

TEST_DATA = Path(__file__).parent / "test_data"


def load_chain(path: Path) -> MG1Spec:
    return ChainSpecSchema.load(path).to_spec()


def scalar_chain(a_explicit, b_explicit, b_minus1, a_tail=None, b_tail=None) -> MG1Spec:
    """Single-phase chain from plain numbers; tails given as (gamma, k0, d)."""
    def tail(t):
        return None if t is None else PowerTailModel(gamma=t[0], k0=t[1], D=[[t[2]]])

    return MG1Spec(
        M0=1,
        M1=1,
        B_minus1=[[b_minus1]],
        Bseq=make_sequence("B", 1, 1, [[[x]] for x in b_explicit], tail(b_tail)),
        Aseq=make_sequence("A", 1, 1, [[[x]] for x in a_explicit], tail(a_tail)),
    )
