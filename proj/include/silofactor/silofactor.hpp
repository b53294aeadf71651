#pragma once

// Umbrella header: the whole library in one include.
//
// Pipeline overview
//   rule texts ──parse──▶ TgdSet ──┐
//   row matching ───────────────┐  │
//   source tables ─────────┐    ▼  ▼
//                          └─▶ build_metadata ─▶ IntegrationMetadata
//                                                   │
//                  ┌────────────────────────────────┼──────────────────┐
//                  ▼                                ▼                  ▼
//            materialize                     factorized_lmm       train_*
//        (assembled target)            (same product, no target)  (learner)
//                  ▲                                ▲
//                  └───────── decide (cost) ────────┘

#include "silofactor/bench.hpp"
#include "silofactor/cost.hpp"
#include "silofactor/engine.hpp"
#include "silofactor/errors.hpp"
#include "silofactor/learner.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"
#include "silofactor/schema_check.hpp"
#include "silofactor/spec_io.hpp"
#include "silofactor/tgd.hpp"
#include "silofactor/types.hpp"
