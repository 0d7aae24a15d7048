"""Voyage, port, ecoregion and discharge data: parsing, leg derivation, fixtures.

All loaders follow the same contract: rows that violate record invariants are
collected into a rejection report (line number + reason) instead of being
silently dropped, and the pipeline proceeds on the clean subset. Structural
problems (missing column, empty file) raise immediately.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import EmptyFile, InvalidSpec, MissingColumn, UnsortedCalls

#: the ten vessel categories used for per-type discharge regression
VESSEL_TYPES = (
    "BulkDry",
    "GeneralCargo",
    "RoRoCargo",
    "Chemical",
    "LiquifiedGasTanker",
    "OilTanker",
    "Passenger",
    "RefrigeratedCargo",
    "Container",
    "Other",
)

VOYAGE_COLUMNS = ("vessel_id", "vessel_type", "dwt", "origin", "dest", "depart", "arrive")
PORT_COLUMNS = ("port_id", "name", "lat", "lon", "ecoregion_id", "temperature_c", "salinity_ppt")
ADJACENCY_COLUMNS = ("ecoregion_a", "ecoregion_b")
DISCHARGE_COLUMNS = ("vessel_type", "dwt", "discharge_m3")


@dataclass(frozen=True)
class VoyageLeg:
    """One direct port-to-port vessel movement (no intermediate stopovers)."""

    vessel_id: str
    vessel_type: str
    dwt: float
    origin: str
    dest: str
    depart: date
    arrive: date

    @property
    def duration_days(self) -> int:
        return (self.arrive - self.depart).days


@dataclass(frozen=True)
class PortRecord:
    port_id: str
    name: str
    lat: float
    lon: float
    ecoregion_id: str
    temperature: Optional[float] = None  # annual mean, deg C
    salinity: Optional[float] = None     # annual mean, ppt

    @property
    def has_environment(self) -> bool:
        return self.temperature is not None and self.salinity is not None


@dataclass(frozen=True)
class EcoregionAdjacency:
    """Unordered ecoregion pairs declared contiguous."""

    pairs: frozenset = frozenset()  # frozenset of sorted 2-tuples

    @staticmethod
    def from_pairs(pairs: Iterable[tuple]) -> "EcoregionAdjacency":
        norm = set()
        for a, b in pairs:
            if a == b:
                continue
            norm.add((a, b) if a <= b else (b, a))
        return EcoregionAdjacency(frozenset(norm))

    def contiguous(self, a: str, b: str) -> bool:
        key = (a, b) if a <= b else (b, a)
        return key in self.pairs


@dataclass(frozen=True)
class DischargeEvent:
    """One non-zero ballast discharge observation."""

    vessel_type: str
    dwt: float
    discharge: float  # m3


@dataclass(frozen=True)
class PortCall:
    """One visit in a vessel's itinerary: arrival at the port, then sailing."""

    vessel_id: str
    vessel_type: str
    dwt: float
    port_id: str
    arrived: date
    sailed: date


@dataclass(frozen=True)
class RowRejection:
    line: int
    reason: str


@dataclass
class LoadResult:
    """Clean records plus the rejection report for one file."""

    records: list
    rejected: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.records, self.rejected))


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def _read_rows(path, columns):
    """Yield (line_number, row_dict) for a CSV file with the given header.

    Lines starting with '#' are treated as comments (pipeline outputs embed a
    config-hash comment line). Raises MissingColumn / EmptyFile.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for raw in reader:
            if raw and raw[0].startswith("#"):
                continue
            header = [c.strip() for c in raw]
            break
        if header is None:
            raise EmptyFile(f"{path}: no header row")
        for name in columns:
            if name not in header:
                raise MissingColumn(name)
        idx = {name: header.index(name) for name in columns}
        rows = []
        for raw in reader:
            if not raw or (raw[0].startswith("#") and len(raw) == 1):
                continue
            if len(raw) < len(header):
                rows.append((reader.line_num, None))
                continue
            rows.append((reader.line_num, {name: raw[i] for name, i in idx.items()}))
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    return rows


def load_voyages(path) -> LoadResult:
    """Parse voyages.csv into VoyageLeg records.

    Invariant-violating rows (negative duration, self-loop legs, bad tonnage,
    unknown vessel type) go to the rejection report.
    """
    result = LoadResult([])
    for line, row in _read_rows(path, VOYAGE_COLUMNS):
        if row is None:
            result.rejected.append(RowRejection(line, "short row"))
            continue
        try:
            dwt = float(row["dwt"])
            depart = _parse_date(row["depart"])
            arrive = _parse_date(row["arrive"])
        except ValueError as exc:
            result.rejected.append(RowRejection(line, f"unparseable field: {exc}"))
            continue
        vessel_type = row["vessel_type"].strip()
        origin = row["origin"].strip()
        dest = row["dest"].strip()
        if vessel_type not in VESSEL_TYPES:
            result.rejected.append(RowRejection(line, f"unknown vessel_type {vessel_type!r}"))
        elif dwt <= 0:
            result.rejected.append(RowRejection(line, "non-positive dwt"))
        elif not origin or not dest:
            result.rejected.append(RowRejection(line, "empty port id"))
        elif origin == dest:
            result.rejected.append(RowRejection(line, "self-loop leg"))
        elif arrive < depart:
            result.rejected.append(RowRejection(line, "negative duration"))
        else:
            result.records.append(
                VoyageLeg(row["vessel_id"].strip(), vessel_type, dwt, origin, dest, depart, arrive)
            )
    return result


def load_ports(path) -> LoadResult:
    result = LoadResult([])
    seen = set()
    for line, row in _read_rows(path, PORT_COLUMNS):
        if row is None:
            result.rejected.append(RowRejection(line, "short row"))
            continue
        try:
            lat = float(row["lat"])
            lon = float(row["lon"])
            temp = float(row["temperature_c"]) if row["temperature_c"].strip() else None
            sal = float(row["salinity_ppt"]) if row["salinity_ppt"].strip() else None
        except ValueError as exc:
            result.rejected.append(RowRejection(line, f"unparseable field: {exc}"))
            continue
        port_id = row["port_id"].strip()
        if not port_id:
            result.rejected.append(RowRejection(line, "empty port_id"))
        elif port_id in seen:
            result.rejected.append(RowRejection(line, f"duplicate port_id {port_id!r}"))
        elif not (-90.0 <= lat <= 90.0):
            result.rejected.append(RowRejection(line, "latitude out of range"))
        elif not (-180.0 <= lon <= 180.0):
            result.rejected.append(RowRejection(line, "longitude out of range"))
        elif sal is not None and sal < 0:
            result.rejected.append(RowRejection(line, "negative salinity"))
        else:
            seen.add(port_id)
            result.records.append(
                PortRecord(port_id, row["name"].strip(), lat, lon,
                           row["ecoregion_id"].strip(), temp, sal)
            )
    return result


def load_adjacency(path) -> tuple:
    """Parse ecoregion_adjacency.csv; returns (EcoregionAdjacency, rejections)."""
    pairs = []
    rejected = []
    for line, row in _read_rows(path, ADJACENCY_COLUMNS):
        if row is None:
            rejected.append(RowRejection(line, "short row"))
            continue
        a, b = row["ecoregion_a"].strip(), row["ecoregion_b"].strip()
        if not a or not b:
            rejected.append(RowRejection(line, "empty ecoregion id"))
        elif a == b:
            rejected.append(RowRejection(line, "self-pair"))
        else:
            pairs.append((a, b))
    return EcoregionAdjacency.from_pairs(pairs), rejected


def load_discharges(path) -> LoadResult:
    result = LoadResult([])
    for line, row in _read_rows(path, DISCHARGE_COLUMNS):
        if row is None:
            result.rejected.append(RowRejection(line, "short row"))
            continue
        try:
            dwt = float(row["dwt"])
            discharge = float(row["discharge_m3"])
        except ValueError as exc:
            result.rejected.append(RowRejection(line, f"unparseable field: {exc}"))
            continue
        vessel_type = row["vessel_type"].strip()
        if vessel_type not in VESSEL_TYPES:
            result.rejected.append(RowRejection(line, f"unknown vessel_type {vessel_type!r}"))
        elif dwt <= 0:
            result.rejected.append(RowRejection(line, "non-positive dwt"))
        elif discharge <= 0:
            result.rejected.append(RowRejection(line, "non-positive discharge"))
        else:
            result.records.append(DischargeEvent(vessel_type, dwt, discharge))
    return result


# --- serialization (round-trip with the loaders) ---------------------------

def write_voyages(path, legs: Sequence[VoyageLeg]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(VOYAGE_COLUMNS)
        for leg in legs:
            writer.writerow([leg.vessel_id, leg.vessel_type, repr(leg.dwt), leg.origin,
                             leg.dest, leg.depart.isoformat(), leg.arrive.isoformat()])


def write_ports(path, ports: Sequence[PortRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PORT_COLUMNS)
        for p in ports:
            writer.writerow([p.port_id, p.name, repr(p.lat), repr(p.lon), p.ecoregion_id,
                             "" if p.temperature is None else repr(p.temperature),
                             "" if p.salinity is None else repr(p.salinity)])


def write_adjacency(path, adjacency: EcoregionAdjacency) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ADJACENCY_COLUMNS)
        for a, b in sorted(adjacency.pairs):
            writer.writerow([a, b])


def write_discharges(path, events: Sequence[DischargeEvent]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DISCHARGE_COLUMNS)
        for e in events:
            writer.writerow([e.vessel_type, repr(e.dwt), repr(e.discharge)])


def write_rejections(path, sections, comment=None) -> None:
    """Write a combined rejection report: sections is {file_label: [RowRejection]}."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", "line", "reason"])
        for label in sorted(sections):
            for rej in sections[label]:
                writer.writerow([label, rej.line, rej.reason])


# --- leg derivation ---------------------------------------------------------

def derive_legs(calls: Iterable[PortCall]) -> list:
    """Turn per-vessel itineraries into direct voyage legs.

    Consecutive calls at distinct ports yield one leg (depart = sail date of
    the first call, arrive = arrival date of the second); consecutive calls at
    the same port yield none. Calls must already be sorted by date per vessel;
    ties keep input order.
    """
    by_vessel: dict = {}
    for call in calls:
        by_vessel.setdefault(call.vessel_id, []).append(call)
    legs = []
    for vessel_id in by_vessel:
        seq = by_vessel[vessel_id]
        for prev, cur in zip(seq, seq[1:]):
            if prev.arrived > prev.sailed or prev.sailed > cur.arrived:
                raise UnsortedCalls(vessel_id)
            if prev.port_id == cur.port_id:
                continue
            legs.append(VoyageLeg(vessel_id, cur.vessel_type, cur.dwt, prev.port_id,
                                  cur.port_id, prev.sailed, cur.arrived))
        if seq and (seq[-1].arrived > seq[-1].sailed):
            raise UnsortedCalls(vessel_id)
    return legs


# --- synthetic fixtures -----------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-cluster description for the fixture generator.

    ``sizes`` are per-cluster port counts (must sum to n_ports). ``leak`` is
    the fraction of voyages whose destination is drawn from a foreign cluster.
    With ``preferential`` set, in-cluster destinations are chosen proportional
    to 1 + current total degree, producing a heavy-tailed degree distribution.
    Discharge events follow discharge = intercept + slope * dwt + noise with
    noise drawn uniformly from [-discharge_noise, +discharge_noise].
    """

    sizes: tuple
    leak: float = 0.0
    legs_per_vessel: int = 8
    preferential: bool = False
    discharge_intercept: float = 100.0
    discharge_slope: float = 0.05
    discharge_noise: float = 0.0
    n_discharge_events: int = 200
    dwt_range: tuple = (5_000.0, 200_000.0)
    base_temperature: float = 12.0
    base_salinity: float = 30.0


def generate_synthetic(seed: int, n_ports: int, n_vessels: int,
                       cluster_spec: SyntheticSpec) -> tuple:
    """Deterministic synthetic (ports, voyages, adjacency, discharges).

    Each cluster gets its own ecoregion and a liner vessel sailing a ring over
    all its ports, so a leak of zero makes the weak components of the voyage
    graph coincide exactly with the planted clusters. Adjacency declares the
    ecoregions of consecutive clusters contiguous.
    """
    spec = cluster_spec
    if n_ports < 2:
        raise InvalidSpec("need at least 2 ports")
    if not spec.sizes or any(s < 1 for s in spec.sizes):
        raise InvalidSpec("cluster sizes must be positive")
    if sum(spec.sizes) != n_ports:
        raise InvalidSpec(f"cluster sizes sum to {sum(spec.sizes)}, expected {n_ports}")
    if not (0.0 <= spec.leak <= 1.0):
        raise InvalidSpec("leak must be in [0, 1]")
    if n_vessels < len(spec.sizes):
        raise InvalidSpec("need at least one vessel per cluster")
    if spec.discharge_noise < 0 or spec.discharge_slope < 0:
        raise InvalidSpec("discharge law parameters must be non-negative")

    rng = random.Random(seed)
    width = max(4, len(str(n_ports - 1)))

    clusters = []  # list of port-id lists
    ports = []
    pid = 0
    for c, size in enumerate(spec.sizes):
        members = []
        for _ in range(size):
            port_id = f"P{pid:0{width}d}"
            members.append(port_id)
            ports.append(PortRecord(
                port_id=port_id,
                name=f"Port {pid}",
                lat=round(rng.uniform(-60.0, 60.0), 4),
                lon=round(rng.uniform(-180.0, 180.0), 4),
                ecoregion_id=f"E{c:02d}",
                temperature=round(spec.base_temperature + 3.0 * c + rng.uniform(-1.0, 1.0), 2),
                salinity=round(max(0.0, spec.base_salinity + rng.uniform(-2.0, 2.0)), 2),
            ))
            pid += 1
        clusters.append(members)

    adjacency = EcoregionAdjacency.from_pairs(
        (f"E{c:02d}", f"E{c + 1:02d}") for c in range(len(spec.sizes) - 1)
    )

    legs = []
    day0 = date(2005, 1, 1)
    degree = {p: 0 for p in ports_ids(ports)}

    def add_leg(vessel_id, vessel_type, dwt, origin, dest, start):
        sail = start + timedelta(days=rng.randrange(0, 4))
        arrive = sail + timedelta(days=rng.randrange(1, 21))
        legs.append(VoyageLeg(vessel_id, vessel_type, dwt, origin, dest, sail, arrive))
        degree[origin] += 1
        degree[dest] += 1
        return arrive

    # one liner per cluster guarantees intra-cluster weak connectivity
    vid = 0
    for c, members in enumerate(clusters):
        vessel_id = f"V{vid:04d}"
        vessel_type = VESSEL_TYPES[vid % len(VESSEL_TYPES)]
        dwt = round(rng.uniform(*spec.dwt_range), 1)
        when = day0
        if len(members) > 1:
            ring = members + [members[0]]
            for origin, dest in zip(ring, ring[1:]):
                when = add_leg(vessel_id, vessel_type, dwt, origin, dest, when)
        vid += 1

    def pick_dest(cluster_idx, origin):
        members = clusters[cluster_idx]
        if spec.leak > 0 and len(clusters) > 1 and rng.random() < spec.leak:
            other = rng.randrange(len(clusters) - 1)
            if other >= cluster_idx:
                other += 1
            members = clusters[other]
        choices = [p for p in members if p != origin]
        if not choices:
            return None
        if spec.preferential:
            weights = [1 + degree[p] for p in choices]
            return rng.choices(choices, weights=weights, k=1)[0]
        return rng.choice(choices)

    # tramp vessels wander mostly inside their home cluster
    for v in range(vid, n_vessels):
        vessel_id = f"V{v:04d}"
        vessel_type = VESSEL_TYPES[v % len(VESSEL_TYPES)]
        dwt = round(rng.uniform(*spec.dwt_range), 1)
        home = v % len(clusters)
        origin = rng.choice(clusters[home])
        when = day0 + timedelta(days=rng.randrange(0, 30))
        for _ in range(spec.legs_per_vessel):
            dest = pick_dest(home, origin)
            if dest is None:
                break
            when = add_leg(vessel_id, vessel_type, dwt, origin, dest, when)
            origin = dest

    discharges = []
    for k in range(spec.n_discharge_events):
        vessel_type = VESSEL_TYPES[k % len(VESSEL_TYPES)]
        dwt = round(rng.uniform(*spec.dwt_range), 1)
        noise = rng.uniform(-spec.discharge_noise, spec.discharge_noise)
        volume = spec.discharge_intercept + spec.discharge_slope * dwt + noise
        if volume <= 0:
            continue
        discharges.append(DischargeEvent(vessel_type, dwt, volume))

    return ports, legs, adjacency, discharges


def ports_ids(ports: Sequence[PortRecord]) -> list:
    return [p.port_id for p in ports]
