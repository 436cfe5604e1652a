"""Replication policies and the rules that move copies between hosts.

Three transcribed flocking rules govern everything here:

* collision avoidance -- a family never holds two replicas on one host and
  never copies to a host it already lives on (enforced structurally);
* velocity matching -- a family holding more than its minimum may give up
  one copy so a family below its minimum can place one, but nobody ever
  gives up their last replica;
* flock centering -- placing a copy on a newly learned host is announced
  to friends so their copies can flow there too.
"""

from __future__ import annotations

import enum

from .model import (
    DO,
    HOST,
    Endpoint,
    MessageKind,
    PolicyKind,
    ReplicaRef,
    SacrificeDecision,
)


class Family:
    """A parent DO plus the preservation copies it has placed elsewhere."""

    __slots__ = ("do_id", "home_host", "r_min", "r_max", "copies",
                 "next_copy_index", "known_hosts", "believed_free", "pending",
                 "chase_target", "connected", "intro_t", "connect_t")

    def __init__(self, do_id: int, home_host: int, r_min: int, r_max: int, intro_t: int):
        self.do_id = do_id
        self.home_host = home_host
        self.r_min = r_min
        self.r_max = r_max
        self.copies: dict[int, int] = {}     # host_id -> copy_index
        self.next_copy_index = 1
        self.known_hosts: set[int] = {home_host}
        # What this family last heard about each host's open slots.  Hosts
        # it has never dealt with are assumed wide open; slot counts only
        # ever shrink, so bad news never goes stale.
        self.believed_free: dict[int, int] = {}
        self.pending = False                 # a survey-style attempt is queued
        self.chase_target: int | None = None # announced host awaiting a visit
        self.connected = False
        self.intro_t = intro_t
        self.connect_t: int | None = None

    @property
    def copy_count(self) -> int:
        return len(self.copies)

    def parent_ref(self) -> ReplicaRef:
        return ReplicaRef(self.do_id, 0, self.home_host)

    def copy_refs(self) -> list[ReplicaRef]:
        return [ReplicaRef(self.do_id, idx, h) for h, idx in sorted(self.copies.items())]


class Host:
    """A discovered storage node: unbounded local DOs, finite foreign slots."""

    __slots__ = ("host_id", "capacity", "local_dos", "foreign", "discovered_t")

    def __init__(self, host_id: int, capacity: int, discovered_t: int):
        self.host_id = host_id
        self.capacity = capacity
        self.local_dos: list[int] = []
        self.foreign: dict[int, int] = {}    # do_id -> copy_index
        self.discovered_t = discovered_t

    @property
    def used(self) -> int:
        return len(self.foreign)

    @property
    def free_slots(self) -> int:
        return self.capacity - len(self.foreign)

    def foreign_refs(self) -> list[ReplicaRef]:
        return [ReplicaRef(d, idx, self.host_id) for d, idx in sorted(self.foreign.items())]


class PlaceOutcome(enum.Enum):
    PLACED = "placed"
    DENIED = "denied"


def copies_to_attempt(policy: PolicyKind, current_c: int, r_min: int, r_max: int,
                      first_connection: bool) -> int:
    """How many copies a family tries to make at one opportunity.

    Least always works one copy at a time.  The aggressive policies burst
    toward their goal at first connection and drop back to single copies
    afterwards.
    """
    if not (0 <= current_c <= r_max):
        raise ValueError(f"copy count {current_c} outside [0, {r_max}]")
    least = min(1, r_max - current_c)
    if not first_connection:
        return least
    if policy is PolicyKind.MODERATE:
        return max(r_min - current_c, 0)
    if policy is PolicyKind.MOST:
        return r_max - current_c
    return least


def candidate_hosts(family: Family, world) -> list[int]:
    """Hosts this family could petition, best believed prospects first.

    Drawn from what it has been told about plus where its friends live,
    excluding anywhere it already has a replica, ordered by the free slots
    the family believes each host has (ties by host id).  Hosts believed
    full stay at the tail: they may still accept via a sacrifice.
    """
    pool = set(family.known_hosts)
    for friend in world.graph.neighbors(family.do_id):
        pool.add(world.families[friend].home_host)
    pool.discard(family.home_host)
    for h in family.copies:
        pool.discard(h)
    cap = world.config.host_capacity
    believed = family.believed_free
    ranked = [(-believed.get(h, cap), h) for h in pool]
    ranked.sort()
    return [h for _, h in ranked]


def place_copy(family: Family, host_id: int, world) -> PlaceOutcome:
    """Ask one host for a slot: request plus acknowledgment or denial.

    Either answer tells the family how many slots the host really has
    left, replacing whatever it believed before.
    """
    if host_id == family.home_host or host_id in family.copies:
        raise ValueError(f"family {family.do_id} already lives on host {host_id}")
    if family.copy_count >= family.r_max:
        raise ValueError(f"family {family.do_id} already at r_max")
    host = world.hosts[host_id]
    do_ep = Endpoint(DO, family.do_id)
    host_ep = Endpoint(HOST, host_id)
    world.send(MessageKind.COPY_REQUEST, do_ep, host_ep)
    if host.free_slots <= 0:
        family.believed_free[host_id] = 0
        world.send(MessageKind.COPY_DENY, host_ep, do_ep)
        return PlaceOutcome.DENIED
    _store_replica(family, host, world)
    family.believed_free[host_id] = host.free_slots
    world.send(MessageKind.COPY_ACK, host_ep, do_ep)
    return PlaceOutcome.PLACED


def _store_replica(family: Family, host: Host, world):
    idx = family.next_copy_index
    family.next_copy_index += 1
    family.copies[host.host_id] = idx
    host.foreign[family.do_id] = idx
    world.note_copy_added(family, host)


def eligible_donor(host: Host, world) -> int | None:
    """Resident with the largest surplus above its minimum, or None.

    A resident qualifies only if strictly above its r_min and holding at
    least two copies, so nobody's last replica is ever taken.
    """
    best = None
    best_key = None
    for do in host.foreign:
        fam = world.families[do]
        c = fam.copy_count
        if c > fam.r_min and c >= 2:
            key = (c, -do)
            if best_key is None or key > best_key:
                best_key = key
                best = do
    return best


def try_sacrifice(beneficiary: Family, host_id: int, world) -> SacrificeDecision | None:
    """Swap a surplus resident's copy for one of the beneficiary's.

    The host removes the donor's replica, stores the beneficiary's, and
    directs the donor to replenish later.  Slot usage is unchanged.
    """
    host = world.hosts[host_id]
    if host.free_slots > 0:
        raise ValueError("sacrifice on a host with free slots")
    if beneficiary.copy_count >= beneficiary.r_min:
        raise ValueError("beneficiary is not below its r_min")
    donor_id = eligible_donor(host, world)
    if donor_id is None:
        return None
    donor = world.families[donor_id]
    del host.foreign[donor_id]
    del donor.copies[host_id]
    world.note_copy_removed(donor, host)
    world.send(MessageKind.SACRIFICE_DIRECTIVE, Endpoint(HOST, host_id), Endpoint(DO, donor_id))
    _store_replica(beneficiary, host, world)
    beneficiary.believed_free[host_id] = 0
    donor.believed_free[host_id] = 0
    world.note_sacrifice(donor_id, host_id, beneficiary.do_id)
    return SacrificeDecision(donor_id, host_id, beneficiary.do_id)


def announce_new_host(family: Family, host_id: int, world) -> int:
    """Tell every friend about a host that just accepted one of our copies.

    The news carries how much room the announcer saw left.  Friends below
    their r_max who hear of actual room go chase that host; a family keeps
    at most one chase queued, retargeted by newer news.
    """
    sent = 0
    do_ep = Endpoint(DO, family.do_id)
    observed = family.believed_free.get(host_id, 0)
    wake = []
    for friend in sorted(world.graph.neighbors(family.do_id)):
        world.send(MessageKind.HOST_ANNOUNCE, do_ep, Endpoint(DO, friend))
        sent += 1
        other = world.families[friend]
        other.known_hosts.add(host_id)
        other.believed_free[host_id] = observed
        if (observed > 0 and other.connected and other.copy_count < other.r_max
                and host_id != other.home_host and host_id not in other.copies):
            if other.chase_target is None:
                wake.append(friend)
            other.chase_target = host_id
    for friend in wake:
        world.enqueue_chase(friend)
    return sent
