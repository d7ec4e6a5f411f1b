"""Distal learning of an inverse model for a linear plant.

Prints the mean performance error per epoch; it should fall by orders of
magnitude over the run.
"""
import logging

from schema_engine import Simulation, load_config, scenario_path

logging.disable(logging.WARNING)

sim = Simulation(load_config(scenario_path("linear-plant")), 0)
sim.run(record=False)
for epoch, err in sim.agent.monitor.performance_means():
    print(f"epoch {epoch:3d}  mean error {err:.3e}")
