"""Two-layer wavelength/space allocation for a fully connected network.

K subnets of M users each are fully connected with K*(K+1)/2 correlated
channel pairs from one broadband source: one pair per subnet (both channels
multiplexed into the subnet splitter) plus one pair per unordered subnet
pair (signal channel to one subnet, idler to the other). Every unordered
user pair then shares exactly one entanglement resource, so KM users need
only K*(K+1) grid channels instead of the KM*(KM-1) a direct
one-channel-pair-per-link design would burn.
"""

from __future__ import annotations

import csv
import string
from dataclasses import dataclass, field
from itertools import combinations

# ITU 100 GHz C-band grid: channel n sits at (190.0 + 0.1*n) THz.
GRID_BASE_THZ = 190.0
GRID_STEP_THZ = 0.1
SPEED_OF_LIGHT_NM_THZ = 299792.458  # c in nm*THz

DEFAULT_CHANNEL_RANGE = (21, 59)


class ChannelRangeError(ValueError):
    """Channel index outside the configured grid range."""


class CapacityError(ValueError):
    """Not enough grid channels around the pump for the requested plan."""


class UnknownUserError(KeyError):
    """User id not present in the plan."""


@dataclass(frozen=True, order=True)
class ItuChannel:
    """One 100 GHz grid slot, identified by its ITU C-band index."""

    index: int

    def frequency_thz(self) -> float:
        return GRID_BASE_THZ + GRID_STEP_THZ * self.index

    def wavelength_nm(self) -> float:
        return SPEED_OF_LIGHT_NM_THZ / self.frequency_thz()

    def label(self) -> str:
        return f"C{self.index}"


def check_channel_range(channel: ItuChannel,
                        valid_range: tuple[int, int] = DEFAULT_CHANNEL_RANGE) -> ItuChannel:
    lo, hi = valid_range
    if not lo <= channel.index <= hi:
        raise ChannelRangeError(
            f"channel C{channel.index} outside valid grid range C{lo}..C{hi}")
    return channel


def itu_channel_frequency(channel: ItuChannel,
                          valid_range: tuple[int, int] = DEFAULT_CHANNEL_RANGE) -> float:
    """Grid center frequency in THz; raises ChannelRangeError when out of range."""
    return check_channel_range(channel, valid_range).frequency_thz()


def correlated_channel(channel: ItuChannel, pump: ItuChannel,
                       valid_range: tuple[int, int] = DEFAULT_CHANNEL_RANGE) -> ItuChannel:
    """Mirror channel about the pump: energy conservation on the grid.

    A photon in `channel` is pair-correlated with one in the returned
    channel, since signal and idler frequencies sum to twice the pump's.
    """
    mirror = ItuChannel(2 * pump.index - channel.index)
    return check_channel_range(mirror, valid_range)


@dataclass(frozen=True)
class ChannelPair:
    """One entanglement resource: a signal/idler channel pair, mirror-symmetric
    about the pump. Canonical orientation puts the higher index on the signal."""

    signal: ItuChannel
    idler: ItuChannel
    resource_id: int

    def __post_init__(self):
        if self.signal.index <= self.idler.index:
            raise ValueError("signal channel index must exceed idler channel index")

    def channels(self) -> tuple[ItuChannel, ItuChannel]:
        return (self.signal, self.idler)


def subnet_label(subnet_id: int) -> str:
    """A, B, C, ... for the first 26 subnets, then S26, S27, ..."""
    if 0 <= subnet_id < 26:
        return string.ascii_uppercase[subnet_id]
    return f"S{subnet_id}"


@dataclass(frozen=True)
class NetworkPlan:
    """Full allocation: which resource serves which subnet or subnet pair,
    and which channels each user receives."""

    pump: ItuChannel
    num_subnets: int
    subnet_size: int
    valid_range: tuple[int, int]
    pump_guard: int
    intra_resources: tuple[tuple[int, ChannelPair], ...]
    inter_resources: tuple[tuple[int, int, ChannelPair], ...]
    user_manifests: tuple[tuple[ItuChannel, ...], ...] = field(repr=False)

    @property
    def num_users(self) -> int:
        return self.num_subnets * self.subnet_size

    def users(self) -> range:
        return range(self.num_users)

    def subnet_of(self, user_id: int) -> int:
        if not 0 <= user_id < self.num_users:
            raise UnknownUserError(f"user {user_id} not in plan (0..{self.num_users - 1})")
        return user_id // self.subnet_size

    def subnet_users(self, subnet_id: int) -> range:
        if not 0 <= subnet_id < self.num_subnets:
            raise ValueError(f"subnet {subnet_id} not in plan")
        return range(subnet_id * self.subnet_size, (subnet_id + 1) * self.subnet_size)

    def resources(self) -> list[ChannelPair]:
        out = [pair for _, pair in self.intra_resources]
        out.extend(pair for _, _, pair in self.inter_resources)
        return out

    def resource_by_id(self, resource_id: int) -> ChannelPair:
        for pair in self.resources():
            if pair.resource_id == resource_id:
                return pair
        raise KeyError(f"resource {resource_id} not in plan")

    def resource_endpoints(self, resource_id: int) -> tuple[int, int]:
        """(signal subnet, idler subnet); equal for an intra resource."""
        for subnet, pair in self.intra_resources:
            if pair.resource_id == resource_id:
                return (subnet, subnet)
        for a, b, pair in self.inter_resources:
            if pair.resource_id == resource_id:
                return (a, b)
        raise KeyError(f"resource {resource_id} not in plan")

    def distinct_channels(self) -> set[ItuChannel]:
        return {ch for pair in self.resources() for ch in pair.channels()}


def naive_channel_count(num_users: int) -> int:
    """Channels a flat one-resource-per-link design needs for full connectivity."""
    if num_users < 2:
        raise ValueError("need at least 2 users")
    return num_users * (num_users - 1)


def build_plan(num_subnets: int, subnet_size: int, pump: ItuChannel,
               valid_range: tuple[int, int] = DEFAULT_CHANNEL_RANGE,
               pump_guard: int = 4) -> NetworkPlan:
    """Construct the deterministic two-layer allocation.

    The pump_guard innermost grid slots on each side of the pump are
    reserved (pump rejection prevents extracting pairs there; the
    reference source starts at the fifth slot out, C35/C45). Intra
    resources then take the K innermost extracted pairs (resource ids
    1..K, resource i serving subnet i-1); inter resources take the next
    K*(K-1)/2 pairs outward, assigned to unordered subnet pairs in
    lexicographic order. For subnet pair (a, b) with a < b the signal
    (higher-index) channel is multiplexed toward subnet a.
    """
    if num_subnets < 1:
        raise ValueError("need at least one subnet")
    if subnet_size < 2:
        raise ValueError("need at least two users per subnet")
    if pump_guard < 0:
        raise ValueError("pump_guard must be >= 0")

    total_pairs = num_subnets * (num_subnets + 1) // 2
    reach = pump_guard + total_pairs
    lo, hi = valid_range
    if pump.index - reach < lo or pump.index + reach > hi:
        raise CapacityError(
            f"{total_pairs} channel pairs beyond a {pump_guard}-channel pump"
            f" guard need grid indices C{pump.index - reach}.."
            f"C{pump.index + reach}, but the valid range is C{lo}..C{hi}")

    def pair_at(resource_id: int) -> ChannelPair:
        offset = pump_guard + resource_id
        signal = check_channel_range(ItuChannel(pump.index + offset), valid_range)
        idler = check_channel_range(ItuChannel(pump.index - offset), valid_range)
        return ChannelPair(signal=signal, idler=idler, resource_id=resource_id)

    intra = tuple((subnet, pair_at(subnet + 1))
                  for subnet in range(num_subnets))

    inter = []
    next_id = num_subnets + 1
    for a, b in combinations(range(num_subnets), 2):
        inter.append((a, b, pair_at(next_id)))
        next_id += 1

    manifests = []
    for subnet in range(num_subnets):
        channels = list(intra[subnet][1].channels())
        for a, b, pair in inter:
            if subnet == a:
                channels.append(pair.signal)
            elif subnet == b:
                channels.append(pair.idler)
        manifest = tuple(channels)
        manifests.extend([manifest] * subnet_size)

    return NetworkPlan(
        pump=pump,
        num_subnets=num_subnets,
        subnet_size=subnet_size,
        valid_range=valid_range,
        pump_guard=pump_guard,
        intra_resources=intra,
        inter_resources=tuple(inter),
        user_manifests=tuple(manifests),
    )


def resource_for_link(plan: NetworkPlan, user_a: int, user_b: int
                      ) -> tuple[int, ChannelPair, str]:
    """The unique resource shared by two distinct users: (id, pair, kind)."""
    if user_a == user_b:
        raise UnknownUserError(f"link endpoints must differ (got user {user_a} twice)")
    sa, sb = plan.subnet_of(user_a), plan.subnet_of(user_b)
    if sa == sb:
        pair = plan.intra_resources[sa][1]
        return (pair.resource_id, pair, "intra")
    lo, hi = min(sa, sb), max(sa, sb)
    for a, b, pair in plan.inter_resources:
        if (a, b) == (lo, hi):
            return (pair.resource_id, pair, "inter")
    raise KeyError(f"no resource connects subnets {lo} and {hi}")


@dataclass(frozen=True)
class ConnectivityReport:
    link_count: int
    passed: bool
    uncovered: tuple[tuple[int, int], ...]
    multiply_covered: tuple[tuple[int, int], ...]
    link_resources: dict[tuple[int, int], int] = field(repr=False)


def verify_full_connectivity(plan: NetworkPlan) -> ConnectivityReport:
    """Check every unordered user pair shares exactly one resource.

    Works from the user manifests alone (not the construction rule): a
    resource connects users u and v when one of them receives its signal
    channel and the other its idler channel.
    """
    manifest_sets = [frozenset(m) for m in plan.user_manifests]
    resources = plan.resources()

    uncovered = []
    multiple = []
    link_resources: dict[tuple[int, int], int] = {}
    for u, v in combinations(plan.users(), 2):
        mu, mv = manifest_sets[u], manifest_sets[v]
        sharing = [p.resource_id for p in resources
                   if (p.signal in mu and p.idler in mv)
                   or (p.idler in mu and p.signal in mv)]
        if not sharing:
            uncovered.append((u, v))
        elif len(sharing) > 1:
            multiple.append((u, v))
        else:
            link_resources[(u, v)] = sharing[0]

    total = plan.num_users * (plan.num_users - 1) // 2
    return ConnectivityReport(
        link_count=total,
        passed=not uncovered and not multiple,
        uncovered=tuple(uncovered),
        multiply_covered=tuple(multiple),
        link_resources=link_resources,
    )


# plan.csv layout (bit-exact, documented in README):
#   record,user_id,subnet,channels,resource_id,signal_channel,idler_channel,role,subnet_a,subnet_b
# User rows fill user_id/subnet/channels and leave resource fields empty;
# resource rows do the reverse. Channel lists are +-joined C-labels in
# manifest order (intra pair first, then inter channels by peer subnet).
PLAN_CSV_HEADER = ["record", "user_id", "subnet", "channels", "resource_id",
                   "signal_channel", "idler_channel", "role", "subnet_a", "subnet_b"]


def write_plan_csv(plan: NetworkPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLAN_CSV_HEADER)
        for user in plan.users():
            channels = "+".join(ch.label() for ch in plan.user_manifests[user])
            writer.writerow(["user", user, subnet_label(plan.subnet_of(user)),
                             channels, "", "", "", "", "", ""])
        for subnet, pair in plan.intra_resources:
            writer.writerow(["resource", "", "", "", pair.resource_id,
                             pair.signal.label(), pair.idler.label(), "intra",
                             subnet_label(subnet), subnet_label(subnet)])
        for a, b, pair in plan.inter_resources:
            writer.writerow(["resource", "", "", "", pair.resource_id,
                             pair.signal.label(), pair.idler.label(), "inter",
                             subnet_label(a), subnet_label(b)])
