"""
Training the quantum DDPG agent on a small grid
===============================================

A desk-sized run: two generators, three-second episodes, a few dozen
episodes of the full loop (quantum actor, quantum critic on twice the
wires, replay buffer, target networks, decaying exploration noise).
The default five-generator, 200-episode experiment is the same call
with the default configs and takes minutes instead of seconds.
"""

import numpy as np

from qdrl.agent import ActorConfig, CriticConfig
from qdrl.lfc import GridParams, LfcEnv, Scenario, ring_coupling
from qdrl.trainer import TrainerConfig, evaluate_policy, train

# ------------------------------------------------------------
# a two-generator plant with a 0.08 pu step at bus 0
# ------------------------------------------------------------
two = lambda v: np.array([v, v])
grid = GridParams(
    inertia=np.array([5.0, 4.0]),
    damping=two(1.5),
    droop=two(0.05),
    governor_tc=two(0.2),
    turbine_tc=two(0.5),
    coupling=ring_coupling(2, 1.5),
    participation=two(0.5),
    frequency_bias=0.05,
    base_frequency_hz=60.0,
    dt=0.01,
    control_interval_s=0.5,
    area_a=(0,),
    area_b=(1,),
    tie_coeff=0.1,
)
scenario = Scenario(load_step=0.08, load_bus=0, onset_s=0.5, length_s=3.0)
env = LfcEnv(grid, scenario, action_limit=0.5)
print(f"observations: {env.n_observations}, actions: {env.n_actions}, "
      f"{int(scenario.length_s / grid.control_interval_s)} control steps per episode")

# ------------------------------------------------------------
# the training loop
# ------------------------------------------------------------
# the actor runs on 2 wires, the critic on 4 ([state, action]); the
# short warmup fills the replay buffer before updates begin
config = TrainerConfig(
    n_episodes=30,
    warmup_episodes=2,
    warmup_steps=8,
    batch_size=8,
    seed=0,
)
result = train(
    env,
    config,
    actor_config=ActorConfig(n_layers=2),
    critic_config=CriticConfig(n_layers=2),
)
print(f"\nstatus: {result.status}")
returns = result.log.returns()
for episode in range(0, 30, 5):
    row = result.log.rows[episode]
    print(f"  episode {row.episode:2d}: return {row.episode_return:8.4f}  "
          f"sigma {row.noise_sigma:.4f}  critic loss {row.critic_loss_mean:.5f}")
print(f"mean return, first 10 episodes: {returns[:10].mean():8.4f}")
print(f"mean return, last 10 episodes:  {returns[-10:].mean():8.4f}")

# ------------------------------------------------------------
# the greedy policy after training
# ------------------------------------------------------------
rollout = evaluate_policy(grid, scenario, result.actor, action_limit=0.5)
print(f"\ngreedy rollout: return {rollout.episode_return:.4f}, "
      f"nadir {rollout.nadir_hz:.4f} Hz, final {rollout.final_freq_hz:.4f} Hz")
print("actions at the last control step:", np.round(rollout.actions_pu[-1], 4))
