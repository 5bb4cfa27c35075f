"""Plan updating: keep the plan unless user work conflicts with it or new input arrives."""
from __future__ import annotations

from dataclasses import replace

from ..canvas.changes import NAME, NODE, Atom
from ..canvas.model import CanvasSnapshot
from .attribution import Attribution, touched_child_counts
from .goals import (
    CHATTER,
    CHILD_COUNT,
    SWITCH_PREFIX,
    Plan,
    Request,
    Requirement,
    build_goal,
    generate_plan,
    parse_request,
    read_value,
    resolve,
)


def constrained_atoms(plan: Plan, snap: CanvasSnapshot) -> set[Atom]:
    """``(node, key)`` pairs the goal constrains on nodes currently realizing it."""
    ids = resolve(plan.goal, snap)
    out: set[Atom] = set()
    for r in plan.goal:
        nid = ids.get(r.key)
        if nid is None:
            continue
        out.update((nid, k) for k, _ in r.props)
    return out


def _drop_with_dependents(goal: tuple[Requirement, ...], dropped: set[str]) -> tuple[Requirement, ...]:
    out = []
    for r in goal:
        if r.key in dropped or (r.parent_req is not None and r.parent_req in dropped):
            dropped.add(r.key)
            continue
        out.append(r)
    return tuple(out)


def resolve_conflicts(plan: Plan, attribution: Attribution, before: CanvasSnapshot, after: CanvasSnapshot) -> Plan:
    """Rewrite goal predicates that the user overrode on plan-realizing nodes.

    A user write to a constrained ``(node, key)`` pair sets that predicate to the
    user's observed value; a user deletion of a realizing node drops its
    requirement (and those nested under it); a user rename of a created node
    follows the new name. Everything else is left byte-identical.
    """
    user = attribution.user_atoms(after)
    if not user:
        return plan
    counts = touched_child_counts(user, before, after)
    ids_after = resolve(plan.goal, after)
    ids_before = resolve(plan.goal, before)
    goal = list(plan.goal)
    dropped: set[str] = set()
    changed = False
    for i, r in enumerate(goal):
        nid = ids_after.get(r.key) or ids_before.get(r.key)
        if nid is None:
            continue
        if (nid, NODE) in user and nid not in after.nodes:
            dropped.add(r.key)
            changed = True
            continue
        new = r
        if r.creates and (nid, NAME) in user and nid in after.nodes:
            new = replace(new, name=after.nodes[nid].name)
        for key, value in r.props:
            if nid not in after.nodes:
                break
            if key == CHILD_COUNT:
                hit = nid in counts
            else:
                hit = (nid, key) in user
            if hit:
                observed = read_value(after, nid, key)
                if observed != value:
                    new = new.with_pred(key, observed)
        if new != r:
            goal[i] = new
            changed = True
    if not changed:
        return plan
    return replace(plan, goal=_drop_with_dependents(tuple(goal), dropped))


def _merge(plan: Plan, extra: tuple[Requirement, ...], text: str, snap: CanvasSnapshot) -> Plan:
    goal = list(plan.goal)
    ids = resolve(plan.goal, snap)
    taken = {r.key for r in goal}
    remap: dict[str, str] = {}
    n = len(goal)
    for r in extra:
        if not r.creates:
            # the node may already realize a requirement, created or existing
            hit = next((i for i, g in enumerate(goal) if (g.node_id if not g.creates else ids.get(g.key)) == r.node_id), None)
            if hit is not None:
                merged = goal[hit]
                for k, v in r.props:
                    merged = merged.with_pred(k, v)
                goal[hit] = merged
                remap[r.key] = merged.key
                continue
        n += 1
        while f"r{n}" in taken:
            n += 1
        key = f"r{n}"
        taken.add(key)
        remap[r.key] = key
        goal.append(replace(r, key=key, parent_req=remap.get(r.parent_req) if r.parent_req else None))
    return replace(plan, goal=tuple(goal), text=f"{plan.text} Then: {text}")


def directed_atoms(plan: Plan, text: str, snap: CanvasSnapshot) -> set[Atom]:
    """Atoms that additional input explicitly asks the agent to write."""
    form, groups = parse_request(text)
    if form == CHATTER:
        return set()
    built = build_goal(form, groups, snap, default_target=plan.anchor, key_prefix="x")
    if built is None:
        return set()
    out = set()
    for r in built[1]:
        if not r.creates:
            out.update((r.node_id, k) for k, _ in r.props)
    return out


def apply_input(plan: Plan, text: str, snap: CanvasSnapshot) -> Plan:
    """Honor additional user input: a ``new task:`` switches tasks, anything else steers the plan."""
    stripped = text.strip()
    if stripped.lower().startswith(SWITCH_PREFIX):
        needed, new = generate_plan(Request(stripped), snap)
        return new if needed else replace(plan, status="fulfilled", goal=(), text=f"{plan.text} Then: stop ({stripped}).")
    form, groups = parse_request(stripped)
    if form == CHATTER:
        return plan
    built = build_goal(form, groups, snap, default_target=plan.anchor, key_prefix="x")
    if built is None:
        return plan
    return _merge(plan, built[1], built[0], snap)


def update_plan(
    plan: Plan,
    attribution: Attribution | None,
    additional_input: str | None = None,
    before: CanvasSnapshot | None = None,
    after: CanvasSnapshot | None = None,
) -> Plan:
    """Default: return ``plan`` unchanged.

    Conflicting user modifications rewrite the affected predicates; additional
    input is always applied on top (it takes priority over earlier plan content).
    """
    if plan.status != "active":
        return plan
    if attribution is not None and before is not None and after is not None:
        plan = resolve_conflicts(plan, attribution, before, after)
    if additional_input:
        plan = apply_input(plan, additional_input, after if after is not None else before)
    return plan
