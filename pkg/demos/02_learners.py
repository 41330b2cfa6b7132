"""Train the clipped-surrogate learner to a known optimum from scratch.

A fixed 3-job 3-machine scheduling instance is small enough to brute
force, so the optimal makespan is an exact target rather than a vague
learning curve.  A two-layer policy-value net is trained with masked
action sampling until its greedy policy schedules at the optimum.
"""

import numpy as np

from rlforge.core import Trajectory, Transition, make_rng
from rlforge.envs.jssp import JsspEnv, brute_force_optimal, classic_pdr, generate_taillard
from rlforge.learners import PolicyValueNet, PpoConfig, masked_argmax, ppo_update, sample_action
from rlforge.nn.optim import DecayedAdam

instance = generate_taillard(3, 3, 1, 9, seed=4242)
optimum = brute_force_optimal(instance).makespan
spt = classic_pdr(instance, "SPT").makespan
print(f"3x3 instance: brute-force optimum {optimum}, SPT dispatching gives {spt}")

env = JsspEnv(instance=instance)
obs_width = env.observation_shape[0] * env.observation_shape[1]
net = PolicyValueNet(obs_width, env.action_count, make_rng(0, 11), hidden=(32,))
opt = DecayedAdam(net.parameters(), lr=2e-3, weight_decay=0.0)
cfg = PpoConfig(surrogate_epochs=4, gamma=1.0, gae_lambda=0.95,
                entropy_cost=0.03, normalize_advantages=True)
rng = make_rng(0, 7)


def greedy_makespan() -> int:
    """Schedule once with argmax actions and report the plan length."""
    obs = env.reset()
    while True:
        logits, _ = net.apply(obs.reshape(1, -1))
        action = masked_argmax(logits[0], env.valid_actions().astype(np.float64))
        obs, _, done, info = env.step(action)
        if done:
            return info["makespan"]


print(f"untrained greedy makespan: {greedy_makespan()}")

steps = 0
for update in range(1, 400):
    # collect six sampled episodes, remembering the valid-action masks
    batch, masks = [], []
    for _ in range(6):
        obs = env.reset()
        transitions = []
        done = False
        while not done:
            mask = env.valid_actions().astype(np.float64)
            logits, _ = net.apply(obs.reshape(1, -1))
            action, logp = sample_action(logits[0], rng, mask)
            nxt, reward, done, _ = env.step(action)
            transitions.append(Transition(obs.reshape(-1), action, reward,
                                          nxt.reshape(-1), done, logp))
            masks.append(mask)
            obs = nxt
            steps += 1
        batch.append(Trajectory(tuple(transitions)))
    ppo_update(batch, net, cfg, opt, masks=np.stack(masks))
    if update % 10 == 0:
        makespan = greedy_makespan()
        print(f"update {update:3d}  env steps {steps:5d}  greedy makespan {makespan}")
        if makespan == optimum:
            print("greedy policy reached the brute-force optimum")
            break
else:
    raise SystemExit("did not reach the optimum inside the demo budget")
