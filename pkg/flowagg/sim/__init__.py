# Simulation core: flow tables, topology, traffic, controller and event loop
