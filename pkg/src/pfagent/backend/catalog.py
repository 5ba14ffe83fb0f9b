"""Shipped benchmark case catalog.

Four families: the IEEE 14-bus and 39-bus (New England) transmission test
systems, the Kundur two-area system, and the PJM 5-bus example. Data is
per-unit on a 100 MVA system base; loads and generator schedules are given
in MW / MVAr and converted on construction.
"""

from __future__ import annotations

from ..errors import CaseLoadFailure
from .network import Bus, Generator, Line, Load, SlackGen, System

# (number, v_init, shunt_b)
_IEEE14_BUSES = [
    (1, 1.060, 0.0), (2, 1.045, 0.0), (3, 1.010, 0.0), (4, 1.0, 0.0),
    (5, 1.0, 0.0), (6, 1.070, 0.0), (7, 1.0, 0.0), (8, 1.090, 0.0),
    (9, 1.0, 0.19), (10, 1.0, 0.0), (11, 1.0, 0.0), (12, 1.0, 0.0),
    (13, 1.0, 0.0), (14, 1.0, 0.0),
]

# (bus1, bus2, r, x, b, tap)
_IEEE14_LINES = [
    (1, 2, 0.01938, 0.05917, 0.0528, 1.0),
    (1, 5, 0.05403, 0.22304, 0.0492, 1.0),
    (2, 3, 0.04699, 0.19797, 0.0438, 1.0),
    (2, 4, 0.05811, 0.17632, 0.0340, 1.0),
    (2, 5, 0.05695, 0.17388, 0.0346, 1.0),
    (3, 4, 0.06701, 0.17103, 0.0128, 1.0),
    (4, 5, 0.01335, 0.04211, 0.0, 1.0),
    (4, 7, 0.0, 0.20912, 0.0, 0.978),
    (4, 9, 0.0, 0.55618, 0.0, 0.969),
    (5, 6, 0.0, 0.25202, 0.0, 0.932),
    (6, 11, 0.09498, 0.19890, 0.0, 1.0),
    (6, 12, 0.12291, 0.25581, 0.0, 1.0),
    (6, 13, 0.06615, 0.13027, 0.0, 1.0),
    (7, 8, 0.0, 0.17615, 0.0, 1.0),
    (7, 9, 0.0, 0.11001, 0.0, 1.0),
    (9, 10, 0.03181, 0.08450, 0.0, 1.0),
    (9, 14, 0.12711, 0.27038, 0.0, 1.0),
    (10, 11, 0.08205, 0.19207, 0.0, 1.0),
    (12, 13, 0.22092, 0.19988, 0.0, 1.0),
    (13, 14, 0.17093, 0.34802, 0.0, 1.0),
]

# (bus, p_mw, q_mvar)
_IEEE14_LOADS = [
    (2, 21.7, 12.7), (3, 94.2, 19.0), (4, 47.8, -3.9), (5, 7.6, 1.6),
    (6, 11.2, 7.5), (9, 29.5, 16.6), (10, 9.0, 5.8), (11, 3.5, 1.8),
    (12, 6.1, 1.6), (13, 13.5, 5.8), (14, 14.9, 5.0),
]

# (bus, p_mw, v_set)
_IEEE14_GENS = [(2, 40.0, 1.045), (3, 0.0, 1.010), (6, 0.0, 1.070), (8, 0.0, 1.090)]
_IEEE14_SLACK = (1, 1.060)


_IEEE39_BUSES = [(n, 1.0, 0.0) for n in range(1, 40)]

_IEEE39_LINES = [
    (1, 2, 0.0035, 0.0411, 0.6987, 1.0),
    (1, 39, 0.0010, 0.0250, 0.7500, 1.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 1.0),
    (2, 25, 0.0070, 0.0086, 0.1460, 1.0),
    (2, 30, 0.0000, 0.0181, 0.0, 1.025),
    (3, 4, 0.0013, 0.0213, 0.2214, 1.0),
    (3, 18, 0.0011, 0.0133, 0.2138, 1.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 1.0),
    (4, 14, 0.0008, 0.0129, 0.1382, 1.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 1.0),
    (5, 8, 0.0008, 0.0112, 0.1476, 1.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 1.0),
    (6, 11, 0.0007, 0.0082, 0.1389, 1.0),
    (6, 31, 0.0000, 0.0250, 0.0, 1.070),
    (7, 8, 0.0004, 0.0046, 0.0780, 1.0),
    (8, 9, 0.0023, 0.0363, 0.3804, 1.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 1.0),
    (10, 11, 0.0004, 0.0043, 0.0729, 1.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 1.0),
    (10, 32, 0.0000, 0.0200, 0.0, 1.070),
    (12, 11, 0.0016, 0.0435, 0.0, 1.006),
    (12, 13, 0.0016, 0.0435, 0.0, 1.006),
    (13, 14, 0.0009, 0.0101, 0.1723, 1.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 1.0),
    (15, 16, 0.0009, 0.0094, 0.1710, 1.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 1.0),
    (16, 19, 0.0016, 0.0195, 0.3040, 1.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 1.0),
    (16, 24, 0.0003, 0.0059, 0.0680, 1.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 1.0),
    (17, 27, 0.0013, 0.0173, 0.3216, 1.0),
    (19, 20, 0.0007, 0.0138, 0.0, 1.060),
    (19, 33, 0.0007, 0.0142, 0.0, 1.070),
    (20, 34, 0.0009, 0.0180, 0.0, 1.009),
    (21, 22, 0.0008, 0.0140, 0.2565, 1.0),
    (22, 23, 0.0006, 0.0096, 0.1846, 1.0),
    (22, 35, 0.0000, 0.0143, 0.0, 1.025),
    (23, 24, 0.0022, 0.0350, 0.3610, 1.0),
    (23, 36, 0.0005, 0.0272, 0.0, 1.000),
    (25, 26, 0.0032, 0.0323, 0.5310, 1.0),
    (25, 37, 0.0006, 0.0232, 0.0, 1.025),
    (26, 27, 0.0014, 0.0147, 0.2396, 1.0),
    (26, 28, 0.0043, 0.0474, 0.7802, 1.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 1.0),
    (28, 29, 0.0014, 0.0151, 0.2490, 1.0),
    (29, 38, 0.0008, 0.0156, 0.0, 1.025),
]

_IEEE39_LOADS = [
    (3, 322.0, 2.4), (4, 500.0, 184.0), (7, 233.8, 84.0), (8, 522.0, 176.0),
    (12, 8.5, 88.0), (15, 320.0, 153.0), (16, 329.0, 32.3), (18, 158.0, 30.0),
    (20, 680.0, 103.0), (21, 274.0, 115.0), (23, 247.5, 84.6),
    (24, 308.6, -92.2), (25, 224.0, 47.2), (26, 139.0, 17.0),
    (27, 281.0, 75.5), (28, 206.0, 27.6), (29, 283.5, 26.9),
    (31, 9.2, 4.6), (39, 1104.0, 250.0),
]

_IEEE39_GENS = [
    (30, 250.0, 1.0499), (32, 650.0, 0.9841), (33, 632.0, 0.9972),
    (34, 508.0, 1.0123), (35, 650.0, 1.0494), (36, 560.0, 1.0636),
    (37, 540.0, 1.0275), (38, 830.0, 1.0265), (39, 1000.0, 1.0300),
]
_IEEE39_SLACK = (31, 0.9820)


# Kundur two-area: G1/G2 in area 1, G3/G4 in area 2, tie 7-8-9.
# Line parameters from the per-km 230 kV data on the 100 MVA base;
# generator step-up transformers are 0.15 pu on 900 MVA.
_KUNDUR_BUSES = [
    (1, 1.03, 0.0), (2, 1.01, 0.0), (3, 1.03, 0.0), (4, 1.01, 0.0),
    (5, 1.0, 0.0), (6, 1.0, 0.0), (7, 1.0, 2.00), (8, 1.0, 0.0),
    (9, 1.0, 3.50), (10, 1.0, 0.0), (11, 1.0, 0.0),
]

_KUNDUR_LINES = [
    (1, 5, 0.0, 0.016667, 0.0, 1.0),
    (2, 6, 0.0, 0.016667, 0.0, 1.0),
    (3, 11, 0.0, 0.016667, 0.0, 1.0),
    (4, 10, 0.0, 0.016667, 0.0, 1.0),
    (5, 6, 0.0025, 0.025, 0.04375, 1.0),
    (6, 7, 0.0010, 0.010, 0.01750, 1.0),
    (7, 8, 0.0110, 0.110, 0.19250, 1.0),
    (7, 8, 0.0110, 0.110, 0.19250, 1.0),
    (8, 9, 0.0110, 0.110, 0.19250, 1.0),
    (8, 9, 0.0110, 0.110, 0.19250, 1.0),
    (9, 10, 0.0010, 0.010, 0.01750, 1.0),
    (10, 11, 0.0025, 0.025, 0.04375, 1.0),
]

_KUNDUR_LOADS = [(7, 967.0, 100.0), (9, 1767.0, 100.0)]
_KUNDUR_GENS = [(1, 700.0, 1.03), (2, 700.0, 1.01), (4, 700.0, 1.01)]
_KUNDUR_SLACK = (3, 1.03)


_PJM5_BUSES = [(n, 1.0, 0.0) for n in range(1, 6)]

_PJM5_LINES = [
    (1, 2, 0.00281, 0.0281, 0.00712, 1.0),
    (1, 4, 0.00304, 0.0304, 0.00658, 1.0),
    (1, 5, 0.00064, 0.0064, 0.03126, 1.0),
    (2, 3, 0.00108, 0.0108, 0.01852, 1.0),
    (3, 4, 0.00297, 0.0297, 0.00674, 1.0),
    (4, 5, 0.00297, 0.0297, 0.00674, 1.0),
]

_PJM5_LOADS = [(2, 300.0, 98.61), (3, 300.0, 98.61), (4, 400.0, 131.47)]
_PJM5_GENS = [(1, 210.0, 1.0), (3, 323.49, 1.0), (5, 466.51, 1.0)]
_PJM5_SLACK = (4, 1.0)


_RAW_CASES: dict[str, dict] = {
    "ieee14": {
        "buses": _IEEE14_BUSES, "lines": _IEEE14_LINES, "loads": _IEEE14_LOADS,
        "gens": _IEEE14_GENS, "slack": _IEEE14_SLACK,
    },
    "ieee39": {
        "buses": _IEEE39_BUSES, "lines": _IEEE39_LINES, "loads": _IEEE39_LOADS,
        "gens": _IEEE39_GENS, "slack": _IEEE39_SLACK,
    },
    "kundur": {
        "buses": _KUNDUR_BUSES, "lines": _KUNDUR_LINES, "loads": _KUNDUR_LOADS,
        "gens": _KUNDUR_GENS, "slack": _KUNDUR_SLACK,
    },
    "pjm5": {
        "buses": _PJM5_BUSES, "lines": _PJM5_LINES, "loads": _PJM5_LOADS,
        "gens": _PJM5_GENS, "slack": _PJM5_SLACK,
    },
}

BUILTIN_CASE_NAMES = tuple(sorted(_RAW_CASES))


def build_case(name: str) -> System:
    if name not in _RAW_CASES:
        raise CaseLoadFailure(
            f"unknown built-in case '{name}'; shipped cases: {', '.join(BUILTIN_CASE_NAMES)}"
        )
    raw = _RAW_CASES[name]
    base = 100.0
    system = System(name=name, base_mva=base)
    for number, v_init, shunt_b in raw["buses"]:
        system.buses.append(
            Bus(idx=f"Bus_{number}", number=number, name=f"{name} bus {number}",
                v_init=v_init, shunt_b=shunt_b)
        )
    for k, (b1, b2, r, x, b, tap) in enumerate(raw["lines"], start=1):
        system.lines.append(Line(idx=f"Line_{k}", bus1=b1, bus2=b2, r=r, x=x, b=b, tap=tap))
    for k, (bus, p, q) in enumerate(raw["loads"], start=1):
        system.loads.append(Load(idx=f"PQ_{k}", bus=bus, p=p / base, q=q / base))
    for k, (bus, p, v) in enumerate(raw["gens"], start=1):
        system.gens.append(Generator(idx=f"PV_{k}", bus=bus, p=p / base, v=v))
    slack_bus, slack_v = raw["slack"]
    system.slack = SlackGen(idx="Slack_1", bus=slack_bus, v=slack_v)
    return system
