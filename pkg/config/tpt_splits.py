"""
State-adjacency graph and adaptation splits for the 48-state temperature task.

TRANSCRIPTION NOTICE: the adjacency list is the standard land-border list of
the 48 contiguous US states (four-corners point contacts excluded). The
East/West and North/South splits are transcriptions of published map
figures, not lists given in text. Border states are placed so that the
target hop levels (1, 2, 3+) hold 8/7/9 states for East->West and 10/6/8
for North->South; individual memberships may still differ from the maps.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from engine.errors import InputError
from graphs.domain_graph import DomainGraph


CONTIGUOUS_STATES: Tuple[str, ...] = (
    "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA", "IA", "ID", "IL",
    "IN", "KS", "KY", "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT",
    "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY", "OH", "OK", "OR", "PA",
    "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY",
)

STATE_BORDERS: Tuple[Tuple[str, str], ...] = (
    ("AL", "FL"), ("AL", "GA"), ("AL", "MS"), ("AL", "TN"),
    ("AZ", "CA"), ("AZ", "NV"), ("AZ", "UT"), ("AZ", "NM"),
    ("AR", "LA"), ("AR", "MO"), ("AR", "MS"), ("AR", "OK"), ("AR", "TN"), ("AR", "TX"),
    ("CA", "NV"), ("CA", "OR"),
    ("CO", "KS"), ("CO", "NE"), ("CO", "NM"), ("CO", "OK"), ("CO", "UT"), ("CO", "WY"),
    ("CT", "MA"), ("CT", "NY"), ("CT", "RI"),
    ("DE", "MD"), ("DE", "NJ"), ("DE", "PA"),
    ("FL", "GA"),
    ("GA", "NC"), ("GA", "SC"), ("GA", "TN"),
    ("ID", "MT"), ("ID", "NV"), ("ID", "OR"), ("ID", "UT"), ("ID", "WA"), ("ID", "WY"),
    ("IL", "IN"), ("IL", "IA"), ("IL", "KY"), ("IL", "MO"), ("IL", "WI"),
    ("IN", "KY"), ("IN", "MI"), ("IN", "OH"),
    ("IA", "MN"), ("IA", "MO"), ("IA", "NE"), ("IA", "SD"), ("IA", "WI"),
    ("KS", "MO"), ("KS", "NE"), ("KS", "OK"),
    ("KY", "MO"), ("KY", "OH"), ("KY", "TN"), ("KY", "VA"), ("KY", "WV"),
    ("LA", "MS"), ("LA", "TX"),
    ("ME", "NH"),
    ("MD", "PA"), ("MD", "VA"), ("MD", "WV"),
    ("MA", "NH"), ("MA", "NY"), ("MA", "RI"), ("MA", "VT"),
    ("MI", "OH"), ("MI", "WI"),
    ("MN", "ND"), ("MN", "SD"), ("MN", "WI"),
    ("MS", "TN"),
    ("MO", "NE"), ("MO", "OK"), ("MO", "TN"),
    ("MT", "ND"), ("MT", "SD"), ("MT", "WY"),
    ("NE", "SD"), ("NE", "WY"),
    ("NV", "OR"), ("NV", "UT"),
    ("NH", "VT"),
    ("NJ", "NY"), ("NJ", "PA"),
    ("NM", "OK"), ("NM", "TX"),
    ("NY", "PA"), ("NY", "VT"),
    ("NC", "SC"), ("NC", "TN"), ("NC", "VA"),
    ("ND", "SD"),
    ("OH", "PA"), ("OH", "WV"),
    ("OK", "TX"),
    ("OR", "WA"),
    ("PA", "WV"),
    ("SD", "WY"),
    ("TN", "VA"),
    ("UT", "WY"),
    ("VA", "WV"),
)

EAST_STATES: Tuple[str, ...] = (
    "CT", "DE", "GA", "IL", "IN", "KY", "MA", "MD", "ME", "MI", "MN", "NC",
    "NH", "NJ", "NY", "OH", "PA", "RI", "SC", "TN", "VA", "VT", "WI", "WV",
)
WEST_STATES: Tuple[str, ...] = (
    "AL", "AR", "AZ", "CA", "CO", "FL", "IA", "ID", "KS", "LA", "MO", "MS",
    "MT", "ND", "NE", "NM", "NV", "OK", "OR", "SD", "TX", "UT", "WA", "WY",
)
NORTH_STATES: Tuple[str, ...] = (
    "CT", "IA", "ID", "IL", "IN", "MA", "ME", "MI", "MN", "MT", "ND", "NE",
    "NH", "NJ", "NY", "OH", "OR", "PA", "RI", "SD", "VT", "WA", "WI", "WY",
)
SOUTH_STATES: Tuple[str, ...] = (
    "AL", "AR", "AZ", "CA", "CO", "DE", "FL", "GA", "KS", "KY", "LA", "MD",
    "MO", "MS", "NC", "NM", "NV", "OK", "SC", "TN", "TX", "UT", "VA", "WV",
)


@dataclass(frozen=True)
class TptSplit:
    """Source/target state lists plus the state-adjacency edges."""
    name: str
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]

    def __post_init__(self):
        source, target = set(self.source), set(self.target)
        if len(source) != len(self.source) or len(target) != len(self.target):
            raise InputError(f"split '{self.name}' lists a state twice")
        if source & target:
            raise InputError(f"split '{self.name}' has states on both sides: {sorted(source & target)}")
        states = source | target
        for a, b in self.edges:
            if a not in states or b not in states:
                raise InputError(f"split '{self.name}' edge ({a}, {b}) names a state outside the split")

    @property
    def states(self) -> List[str]:
        """Domain order: states sorted alphabetically; index = domain id."""
        return sorted(set(self.source) | set(self.target))

    @property
    def state_index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def graph(self) -> DomainGraph:
        index = self.state_index
        return DomainGraph.from_edges(len(index), [(index[a], index[b]) for a, b in self.edges])

    def source_domains(self) -> List[int]:
        index = self.state_index
        return sorted(index[s] for s in self.source)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "source": list(self.source),
            "target": list(self.target),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_json(cls, document: dict, name: str = "custom") -> "TptSplit":
        try:
            return cls(
                name=document.get("name", name),
                source=tuple(document["source"]),
                target=tuple(document["target"]),
                edges=tuple((str(a), str(b)) for a, b in document["edges"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"split config is malformed: {e}") from None


BUILTIN_SPLITS: Dict[str, TptSplit] = {
    "ew": TptSplit("ew", EAST_STATES, WEST_STATES, STATE_BORDERS),
    "ns": TptSplit("ns", NORTH_STATES, SOUTH_STATES, STATE_BORDERS),
}


def get_split(name_or_path: Union[str, Path]) -> TptSplit:
    """Resolve a built-in split name ('ew', 'ns') or load a split JSON file."""
    key = str(name_or_path).lower()
    if key in BUILTIN_SPLITS:
        return BUILTIN_SPLITS[key]
    path = Path(name_or_path)
    if not path.exists():
        raise InputError(f"split '{name_or_path}' is neither a built-in split nor an existing file")
    with path.open("r", encoding="utf-8") as fh:
        return TptSplit.from_json(json.load(fh), name=path.stem)


def write_split(split: TptSplit, path: Union[str, Path]) -> Path:
    """Write a split config as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(split.to_json(), fh, indent=2)
    return path


def all_states_covered(states: Sequence[str]) -> bool:
    return sorted(states) == sorted(CONTIGUOUS_STATES)
