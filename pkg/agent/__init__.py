"""
Self-healing agent package for the wpp-selfheal project.

- Q-network and adaptive-moment optimizer (numpy)
- Bounded experience replay
- DQN core: action space, epsilon-greedy selection, reward, TD targets
- Threshold-triggered control loop and training driver
"""
