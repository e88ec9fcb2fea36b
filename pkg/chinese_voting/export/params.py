"""
Key/value text files for fitted and ground-truth parameters.

Layout, one entry per line with values in round-trip precision:

    lambda 2.0
    mu -1.0
    sigma2 1.0
    tau 1.2
    alpha 0.5
    nu item-00000 0.0
    q item-00000 0 0.4417

Community scalars come first, then one ``nu`` row per item and one ``q`` row
per response. Item ids may contain spaces; values are parsed from the right.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from chinese_voting.core.errors import MalformedRecord
from chinese_voting.core.trajectory import Dataset
from chinese_voting.export.base import ExportFormat, Exporter
from chinese_voting.models.base import SelectionParams, VotingParams

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """Shortest text that round-trips ``value``."""
    return repr(float(value))


@dataclass
class ParamsFile:
    """
    Contents of a parameter file.

    Attributes:
        voting: λ, μ, σ², ν and q
        selection: τ and α when present
        item_order: Item ids in the order their rows appear
        extra: Additional scalar entries
    """
    voting: VotingParams
    selection: Optional[SelectionParams] = None
    item_order: List[str] = field(default_factory=list)
    extra: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def for_dataset(cls, ds: Dataset, voting: VotingParams,
                    selection: Optional[SelectionParams] = None,
                    extra: Optional[Dict[str, float]] = None) -> "ParamsFile":
        return cls(voting=voting, selection=selection,
                   item_order=[item.item_id for item in ds.items], extra=dict(extra or {}))


class ParamsExporter(Exporter):
    """Writes ``ParamsFile`` objects in the key/value layout."""

    format = ExportFormat.TEXT

    def render(self, obj: ParamsFile) -> bytes:
        voting = obj.voting
        lines = [
            f"lambda {format_float(voting.lam)}",
            f"mu {format_float(voting.mu)}",
            f"sigma2 {format_float(voting.sigma2)}",
        ]
        if obj.selection is not None:
            lines.append(f"tau {format_float(obj.selection.tau)}")
            lines.append(f"alpha {format_float(obj.selection.alpha)}")
        for key in sorted(obj.extra):
            lines.append(f"{key} {format_float(obj.extra[key])}")

        order = obj.item_order or sorted(voting.nu)
        rank = {item_id: k for k, item_id in enumerate(order)}
        for item_id in sorted(voting.nu, key=lambda i: (rank.get(i, len(rank)), i)):
            lines.append(f"nu {item_id} {format_float(voting.nu[item_id])}")
        for (item_id, j) in sorted(voting.quality, key=lambda k: (rank.get(k[0], len(rank)), k)):
            lines.append(f"q {item_id} {j} {format_float(voting.quality[(item_id, j)])}")
        return ("\n".join(lines) + "\n").encode("utf-8")


def parse_params(text: str) -> ParamsFile:
    """
    Read a parameter file written by ``ParamsExporter``.

    Raises:
        MalformedRecord: On an unknown key or an unparsable value
    """
    scalars: Dict[str, float] = {}
    nu: Dict[str, float] = {}
    quality: Dict[Tuple[str, int], float] = {}
    order: List[str] = []

    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            if key == "nu":
                item_id, value = rest.rsplit(" ", 1)
                nu[item_id] = float(value)
                order.append(item_id)
            elif key == "q":
                item_id, response, value = rest.rsplit(" ", 2)
                quality[(item_id, int(response))] = float(value)
            else:
                scalars[key] = float(rest)
        except ValueError:
            raise MalformedRecord(f"cannot parse parameter entry {line!r}", line=number) from None

    for required in ("lambda", "mu"):
        if required not in scalars:
            raise MalformedRecord(f"parameter file lacks {required!r}")

    voting = VotingParams(
        lam=scalars.pop("lambda"),
        mu=scalars.pop("mu"),
        nu=nu,
        quality=quality,
        sigma2=scalars.pop("sigma2", 1.0),
    )
    selection = None
    if "tau" in scalars:
        selection = SelectionParams(tau=scalars.pop("tau"), alpha=scalars.pop("alpha", 0.5))
    return ParamsFile(voting=voting, selection=selection, item_order=order, extra=scalars)
