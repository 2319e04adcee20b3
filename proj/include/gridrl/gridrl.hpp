#pragma once

// Everything in one include.

#include "gridrl/core/environment.hpp"
#include "gridrl/core/errors.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/core/mdp_environment.hpp"
#include "gridrl/core/mdp_io.hpp"
#include "gridrl/core/random.hpp"

#include "gridrl/envs/chain_walk.hpp"
#include "gridrl/envs/grid_world.hpp"
#include "gridrl/envs/tensor_env.hpp"

#include "gridrl/tabular/control.hpp"
#include "gridrl/tabular/epsilon.hpp"
#include "gridrl/tabular/policy_iteration.hpp"
#include "gridrl/tabular/q_table.hpp"
#include "gridrl/tabular/td.hpp"
#include "gridrl/tabular/traces.hpp"

#include "gridrl/approx/checkpoint.hpp"
#include "gridrl/approx/gradcheck.hpp"
#include "gridrl/approx/network.hpp"
#include "gridrl/approx/optim.hpp"
#include "gridrl/approx/parameter_set.hpp"
#include "gridrl/approx/tensor.hpp"

#include "gridrl/pg/actor_critic.hpp"
#include "gridrl/pg/policy.hpp"
#include "gridrl/pg/reinforce.hpp"

#include "gridrl/dqn/dqn.hpp"
#include "gridrl/dqn/replay.hpp"

#include "gridrl/a3c/a3c.hpp"
#include "gridrl/a3c/grad_log.hpp"
#include "gridrl/a3c/returns.hpp"
#include "gridrl/a3c/shared_store.hpp"

#include "gridrl/preprocess/frame.hpp"
#include "gridrl/preprocess/history.hpp"
#include "gridrl/preprocess/pipeline.hpp"

#include "gridrl/minideathmatch/layout.hpp"
#include "gridrl/minideathmatch/world.hpp"

#include "gridrl/harness/check.hpp"
#include "gridrl/harness/config.hpp"
#include "gridrl/harness/metrics.hpp"
#include "gridrl/harness/runner.hpp"
