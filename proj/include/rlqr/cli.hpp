#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlqr/biasshift.hpp"
#include "rlqr/config.hpp"
#include "rlqr/env.hpp"
#include "rlqr/td3.hpp"

namespace rlqr {

inline constexpr const char* kToolVersion = "1.0.0";

// Every tunable of the tool in one place, resolved from a Config with
// defaults filled in and derived values (noise scales, offsets) made
// explicit.
struct ResolvedConfig {
  PendulumParams env;
  TD3Config td3;
  BiasShiftConfig bias;
  bool k_reg = true;  // supervise the output map toward the plant's gain

  double fit_nu_k = 1.0;
  double fit_nu_growth = 10.0;
  int fit_max_rounds = 20;
  double fit_epsilon = -1.0;  // < 0 resolves to 1e-6 * torque_max

  double cf_nu = 1.0;
  double cf_penalty_growth = 10.0;
  int cf_max_outer = 50;
  double cf_residual_tol = 1e-6;
  double cf_nsd_tol = 1e-10;
  double cf_maclaurin_err = 0.02;

  std::uint64_t seed = 0;

  double offset_epsilon() const {
    return fit_epsilon >= 0 ? fit_epsilon : 1e-6 * env.torque_max;
  }
};

// Throws ConfigError on unknown keys or malformed values. RLQR_SEED in the
// environment overrides the seed key.
ResolvedConfig resolve_config(const Config& c);

// Full manifest content: every key written with its resolved value.
Config to_config(const ResolvedConfig& r);

// args excludes the program name. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or config error.
int run_cli(const std::vector<std::string>& args);

}  // namespace rlqr
