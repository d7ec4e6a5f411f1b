"""Silence a learned motor and watch the constructed controller route around it.

The grip-lesion scenario cuts the original open-grip motor after the agent has
built a controller for it. The rebuilt motor is still reachable through its
dual, so the goal comes back within a few ticks. A control run with the lesion
applied from the start never gets there.
"""
import copy
import json
import logging

from schema_engine import Simulation, parse_config, scenario_path

logging.disable(logging.WARNING)

doc = json.loads(scenario_path("grip-lesion").read_text())
onset = doc["lesions"][0]["onset"]
delay = doc["environment"]["params"]["tau_grip"]
for label, d in (("trained", doc), ("control", copy.deepcopy(doc))):
    if label == "control":
        d["lesions"][0]["onset"] = 0
    for seed in range(3):
        records = Simulation(parse_config(d), seed).run()
        # grasps landing earlier than the grip delay were commanded before the cut
        start = d["lesions"][0]["onset"] + delay
        after = [r["tick"] for r in records if r["reward"] > 0 and r["tick"] >= start]
        first = after[0] - start + delay if after else None
        print(f"{label} seed {seed}: {len(after)} rewards after lesion, first after {first} ticks")
print(f"(lesion onset for the trained runs: tick {onset})")
