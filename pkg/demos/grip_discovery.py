"""Watch an agent discover which motors cause which sensations, then rebuild itself.

Runs the grip world for a few seeds and reports the harvested relations, the
construction it triggered and how often the goal was reached before and after.
"""
import logging

from schema_engine import Simulation, load_config, scenario_path

logging.disable(logging.WARNING)

cfg = load_config(scenario_path("grip-world"))
for seed in range(3):
    sim = Simulation(cfg, seed)
    records = sim.run()
    agent = sim.agent
    found = sorted((agent.base(y), agent.base(x), tau) for x, y, tau in agent.relations.harvested)
    print(f"seed {seed}: relations {found}")
    for c in agent.constructions:
        built = min(r["tick"] for r in records if r["constructions"])
        early = sum(r["reward"] > 0 for r in records if r["tick"] < built)
        late = sum(r["reward"] > 0 for r in records if r["tick"] >= built)
        print(f"  tick {c['tick']}: added {c['added']}, removed {c['removed']}")
        print(f"  rewards before construction {early}, after {late}")
