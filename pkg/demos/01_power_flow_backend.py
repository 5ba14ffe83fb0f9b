"""Tour of the simulation backend: cases, edits, solver, contingencies.

Run with:  python3 demos/01_power_flow_backend.py
"""

from pfagent import backend

print("shipped cases:", ", ".join(backend.list_cases()))

# Base-case solve.
ss = backend.get_case("ieee14")
ss.setup()
res = ss.run_power_flow()
min_bus, min_v = res.min_voltage()
print(f"\nieee14 base case: converged={res.converged} in {res.iterations} iterations")
print(f"  slack injection: {res.slack_p_mw:.1f} MW")
print(f"  lowest voltage:  {min_v:.4f} pu at Bus_{min_bus}")

# The workflow order: structural additions before setup, edits after.
ss = backend.get_case("ieee14")
ss.add_load(4, 20.0, 5.0)          # new load, pre-setup
ss.setup()
ss.scale_loads(1.1)                # parameter edits, post-setup
ss.set_slack_voltage(1.05)
res = ss.run_power_flow()
print(f"\nmodified case: total load {ss.total_load_mw():.1f} MW, "
      f"V(Bus_14) = {res.v_mag[14]:.4f} pu")

# Corridor outage with islanding detection.
ss = backend.get_case("ieee14")
ss.setup()
ss.line_outage_between(7, 8)       # bus 8 hangs off this corridor
res = ss.run_power_flow()
print(f"\noutage 7-8: islanded={res.islanded} (no solution attempted)")

# N-1 screen over every line, each contingency on a copy.
ss = backend.get_case("ieee39")
ss.setup()
worst = None
islanded = 0
for line in [ln.idx for ln in ss.lines]:
    trial = ss.copy()
    trial.line_outage(line)
    cres = trial.run_power_flow()
    if cres.islanded:
        islanded += 1
        continue
    if cres.converged:
        _, v = cres.min_voltage()
        if worst is None or v < worst[1]:
            worst = (line, v)
print(f"\nieee39 N-1: {islanded} islanding contingencies; "
      f"worst case {worst[0]} with min V {worst[1]:.4f} pu")
