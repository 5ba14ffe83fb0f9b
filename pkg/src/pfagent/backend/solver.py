"""Newton-Raphson AC power flow with topology (islanding) screening.

The solver works on the in-service network only. If any bus is no longer
connected to the slack bus, the case is flagged as islanded and no solve
is attempted: split networks have no common reference and the study must
surface the topology change instead of a misleading solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .network import System


@dataclass
class PowerFlowResult:
    converged: bool
    islanded: bool
    iterations: int
    max_mismatch: float
    bus_numbers: list[int] = field(default_factory=list)
    v_mag: dict[int, float] = field(default_factory=dict)      # bus number -> pu
    v_angle_deg: dict[int, float] = field(default_factory=dict)
    slack_p_mw: float = 0.0
    slack_q_mvar: float = 0.0
    line_angle_deg: dict[str, float] = field(default_factory=dict)  # |angle diff|

    def voltage_of(self, bus: int) -> float:
        return self.v_mag[bus]

    def min_voltage(self) -> tuple[int, float]:
        bus = min(self.v_mag, key=lambda b: (self.v_mag[b], b))
        return bus, self.v_mag[bus]

    def max_voltage(self) -> tuple[int, float]:
        bus = max(self.v_mag, key=lambda b: (self.v_mag[b], -b))
        return bus, self.v_mag[bus]


def connected_to_slack(system: "System") -> set[int]:
    """Bus numbers reachable from the slack bus over in-service lines."""
    adj: dict[int, set[int]] = {b.number: set() for b in system.buses}
    for ln in system.lines:
        if ln.in_service:
            adj[ln.bus1].add(ln.bus2)
            adj[ln.bus2].add(ln.bus1)
    assert system.slack is not None
    seen = {system.slack.bus}
    stack = [system.slack.bus]
    while stack:
        node = stack.pop()
        for other in adj[node]:
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen


def build_ybus(system: "System", order: dict[int, int]) -> np.ndarray:
    n = len(order)
    ybus = np.zeros((n, n), dtype=complex)
    for ln in system.lines:
        if not ln.in_service:
            continue
        i, j = order[ln.bus1], order[ln.bus2]
        y = 1.0 / complex(ln.r, ln.x)
        bc = 1j * ln.b / 2.0
        t = ln.tap if ln.tap else 1.0
        ybus[i, i] += (y + bc) / (t * t)
        ybus[j, j] += y + bc
        ybus[i, j] -= y / t
        ybus[j, i] -= y / t
    for bus in system.buses:
        if bus.shunt_b:
            k = order[bus.number]
            ybus[k, k] += 1j * bus.shunt_b
    return ybus


def solve_power_flow(system: "System", max_iter: int = 25, tol: float = 1e-8) -> PowerFlowResult:
    reachable = connected_to_slack(system)
    if reachable != set(system.bus_numbers()):
        return PowerFlowResult(
            converged=False, islanded=True, iterations=0, max_mismatch=math.inf
        )

    numbers = sorted(system.bus_numbers())
    order = {num: i for i, num in enumerate(numbers)}
    n = len(numbers)
    ybus = build_ybus(system, order)

    assert system.slack is not None
    slack_i = order[system.slack.bus]
    pv_buses = sorted({g.bus for g in system.gens if g.in_service} - {system.slack.bus})
    pv_i = [order[b] for b in pv_buses]
    pq_i = [i for i in range(n) if i != slack_i and i not in pv_i]

    # Net scheduled injections in pu.
    p_sched = np.zeros(n)
    q_sched = np.zeros(n)
    for g in system.gens:
        if g.in_service:
            p_sched[order[g.bus]] += g.p
    for ld in system.loads:
        if ld.in_service:
            p_sched[order[ld.bus]] -= ld.p
            q_sched[order[ld.bus]] -= ld.q

    # Initial guess: setpoints at voltage-controlled buses, flat elsewhere.
    vm = np.ones(n)
    va = np.full(n, math.radians(system.slack.a))
    vm[slack_i] = system.slack.v
    pv_setpoint: dict[int, float] = {}
    for g in system.gens:
        if g.in_service and g.bus != system.slack.bus:
            pv_setpoint[order[g.bus]] = g.v
    for i, v in pv_setpoint.items():
        vm[i] = v

    non_slack = [i for i in range(n) if i != slack_i]
    mismatch_norm = math.inf
    iterations = 0

    for iterations in range(1, max_iter + 1):
        v = vm * np.exp(1j * va)
        s_inj = v * np.conj(ybus @ v)
        dp = p_sched - s_inj.real
        dq = q_sched - s_inj.imag
        mismatch = np.concatenate([dp[non_slack], dq[pq_i]])
        mismatch_norm = float(np.max(np.abs(mismatch))) if mismatch.size else 0.0
        if mismatch_norm < tol:
            break

        j11, j12, j21, j22 = _jacobian(ybus, v, vm, va)
        top = np.hstack([j11[np.ix_(non_slack, non_slack)], j12[np.ix_(non_slack, pq_i)]])
        bot = np.hstack([j21[np.ix_(pq_i, non_slack)], j22[np.ix_(pq_i, pq_i)]])
        jac = np.vstack([top, bot])
        try:
            dx = np.linalg.solve(jac, mismatch)
        except np.linalg.LinAlgError:
            return PowerFlowResult(
                converged=False, islanded=False,
                iterations=iterations, max_mismatch=mismatch_norm,
            )
        va[non_slack] += dx[: len(non_slack)]
        vm[pq_i] += dx[len(non_slack):]
    else:
        return PowerFlowResult(
            converged=False, islanded=False,
            iterations=max_iter, max_mismatch=mismatch_norm,
        )

    v = vm * np.exp(1j * va)
    s_inj = v * np.conj(ybus @ v)
    base = system.base_mva
    load_p = np.zeros(n)
    load_q = np.zeros(n)
    for ld in system.loads:
        if ld.in_service:
            load_p[order[ld.bus]] += ld.p
            load_q[order[ld.bus]] += ld.q

    result = PowerFlowResult(
        converged=True,
        islanded=False,
        iterations=iterations,
        max_mismatch=mismatch_norm,
        bus_numbers=numbers,
        v_mag={num: float(vm[order[num]]) for num in numbers},
        v_angle_deg={num: math.degrees(float(va[order[num]])) for num in numbers},
        slack_p_mw=float((s_inj.real[slack_i] + load_p[slack_i]) * base),
        slack_q_mvar=float((s_inj.imag[slack_i] + load_q[slack_i]) * base),
    )
    for ln in system.lines:
        if ln.in_service:
            diff = result.v_angle_deg[ln.bus1] - result.v_angle_deg[ln.bus2]
            result.line_angle_deg[ln.idx] = abs(diff)
    return result


def _jacobian(ybus: np.ndarray, v: np.ndarray, vm: np.ndarray, va: np.ndarray):
    """Full polar power-flow Jacobian blocks (dP/dθ, dP/dV, dQ/dθ, dQ/dV)."""
    n = len(v)
    g = ybus.real
    b = ybus.imag
    j11 = np.zeros((n, n))
    j12 = np.zeros((n, n))
    j21 = np.zeros((n, n))
    j22 = np.zeros((n, n))
    vmat = vm[:, None] * vm[None, :]
    dth = va[:, None] - va[None, :]
    cos_ = np.cos(dth)
    sin_ = np.sin(dth)
    # Off-diagonal terms.
    j11[:] = vmat * (g * sin_ - b * cos_)
    j12[:] = vm[:, None] * (g * cos_ + b * sin_)
    j21[:] = -vmat * (g * cos_ + b * sin_)
    j22[:] = vm[:, None] * (g * sin_ - b * cos_)
    # Diagonals from the full injection sums.
    s = (vm * np.exp(1j * va)) * np.conj(ybus @ (vm * np.exp(1j * va)))
    p_calc = s.real
    q_calc = s.imag
    for i in range(n):
        j11[i, i] = -q_calc[i] - b[i, i] * vm[i] ** 2
        j12[i, i] = p_calc[i] / vm[i] + g[i, i] * vm[i]
        j21[i, i] = p_calc[i] - g[i, i] * vm[i] ** 2
        j22[i, i] = q_calc[i] / vm[i] - b[i, i] * vm[i]
    return j11, j12, j21, j22
