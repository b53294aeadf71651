#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "silofactor/engine.hpp"
#include "silofactor/materialize.hpp"
#include "support/random_instances.hpp"

using namespace silofactor;

namespace {

const std::string kJoinRule =
    "forall m,n,a,hr,o,dd (S1(m,n,a,hr) & S2(m,n,a,o,dd) -> T(m,a,hr,o))";
const std::string kS1Singleton = "forall m,n,a,hr (S1(m,n,a,hr) -> exists o T(m,a,hr,o))";
const std::string kS2Singleton = "forall m,n,a,o,dd (S2(m,n,a,o,dd) -> exists hr T(m,a,hr,o))";

struct Fixture {
    TgdSet ts;
    IntegrationMetadata meta;
    std::vector<DataMatrix> data;
};

Fixture patient_fixture(bool inner_only = false) {
    Fixture f;
    f.ts.sources = {"S1", "S2"};
    f.ts.target = TargetSchema{"T", {"m", "a", "hr", "o"}};
    f.ts.tgds.push_back(parse_tgd(kJoinRule));
    if (!inner_only) {
        f.ts.tgds.push_back(parse_tgd(kS1Singleton));
        f.ts.tgds.push_back(parse_tgd(kS2Singleton));
    }
    validate_tgd_set(f.ts);

    RowMatching m;
    m.clusters.push_back(RowCluster{{{1, 3}, {2, 2}}});
    f.meta = build_metadata(f.ts, m, {4, 3}, {1, 2});
    f.data = {DataMatrix::from_rows({{1, 34, 72}, {0, 58, 66}, {1, 47, 80}, {0, 29, 75}}),
              DataMatrix::from_rows({{1, 61, 92}, {0, 45, 97}, {0, 29, 95}})};
    return f;
}

}  // namespace

TEST_CASE("row sums of the patient fixture via the factorized path") {
    const Fixture f = patient_fixture();
    const DataMatrix ones(4, 1, 1.0);
    const DataMatrix y = factorized_lmm(LmmRequest{f.meta, f.data, ones});
    CHECK(y == DataMatrix::from_rows({{199}, {107}, {124}, {128}, {154}, {142}}));

    // A second right-hand-side column that just picks out the label column.
    DataMatrix x(4, 2, 0.0);
    for (std::size_t j = 0; j < 4; ++j) x(j, 0) = 1.0;
    x(0, 1) = 1.0;
    const DataMatrix y2 = factorized_lmm(LmmRequest{f.meta, f.data, x});
    CHECK(y2 == DataMatrix::from_rows(
                    {{199, 0}, {107, 1}, {124, 0}, {128, 1}, {154, 1}, {142, 0}}));
}

TEST_CASE("inner join collapses to the matched rows") {
    const Fixture f = patient_fixture(/*inner_only=*/true);
    REQUIRE(f.meta.r_T == 1);
    const DataMatrix ones(4, 1, 1.0);
    CHECK(factorized_lmm(LmmRequest{f.meta, f.data, ones}) ==
          DataMatrix::from_rows({{199}}));
}

TEST_CASE("a single source's masked term subtracts the shared cells") {
    const Fixture f = patient_fixture();
    const DataMatrix ones(4, 1, 1.0);

    // Unmasked, the second source's slice contributes 0+29+95 on the merged
    // row; after masking it loses the two cells the base also covers (m and
    // a), leaving 95.
    const DataMatrix unmasked =
        matmul(local_contribution(1, f.meta, f.data), ones);
    CHECK(unmasked == DataMatrix::from_rows({{124}, {0}, {0}, {0}, {154}, {142}}));

    const DataMatrix masked = masked_lmm_correction(1, f.meta, f.data, ones);
    CHECK(masked == DataMatrix::from_rows({{95}, {0}, {0}, {0}, {154}, {142}}));

    // The base term plus the masked term is the whole answer.
    const DataMatrix base_term = masked_lmm_correction(0, f.meta, f.data, ones);
    CHECK(add(base_term, masked) ==
          DataMatrix::from_rows({{199}, {107}, {124}, {128}, {154}, {142}}));
}

TEST_CASE("shape mismatches are rejected") {
    const Fixture f = patient_fixture();
    const DataMatrix bad_x(3, 1, 1.0);
    CHECK_THROWS_AS(factorized_lmm(LmmRequest{f.meta, f.data, bad_x}), ShapeError);

    auto bad_data = f.data;
    bad_data[0] = DataMatrix(4, 2);
    const DataMatrix ones(4, 1, 1.0);
    CHECK_THROWS_AS(factorized_lmm(LmmRequest{f.meta, bad_data, ones}), ShapeError);
}

TEST_CASE("factorized, literal-masked and assembled paths agree exactly") {
    std::mt19937_64 rng(99991);
    const Scenario kinds[] = {Scenario::FullOuterJoin, Scenario::InnerJoin, Scenario::LeftJoin,
                              Scenario::Union};
    for (const Scenario kind : kinds) {
        ts_gen::GenOptions opt;
        opt.kind = kind;
        opt.max_rows = 40;
        for (int trial = 0; trial < 30; ++trial) {
            const ts_gen::RandomInstance inst = ts_gen::make_instance(rng, opt);
            const ts_gen::BuiltInstance built = ts_gen::build(inst);
            const LmmRequest req{built.meta, built.data, inst.x};

            const DataMatrix fact = factorized_lmm(req);
            const DataMatrix literal = factorized_lmm_literal(req);
            const DataMatrix assembled = matmul(materialize(built.meta, built.data).matrix, inst.x);

            INFO("kind " << to_string(kind) << " trial " << trial);
            CHECK(fact == literal);
            CHECK(fact == assembled);
        }
    }
}

TEST_CASE("thread count never changes the answer") {
    std::mt19937_64 rng(31337);
    ts_gen::GenOptions opt;
    opt.kind = Scenario::FullOuterJoin;
    opt.max_sources = 3;
    opt.max_rows = 60;
    for (int trial = 0; trial < 10; ++trial) {
        const ts_gen::RandomInstance inst = ts_gen::make_instance(rng, opt);
        const ts_gen::BuiltInstance built = ts_gen::build(inst);
        const LmmRequest req{built.meta, built.data, inst.x};

        const DataMatrix sequential = factorized_lmm(req, EngineOptions{1});
        const DataMatrix threaded = factorized_lmm(req, EngineOptions{4});
        CHECK(sequential == threaded);
    }
}

TEST_CASE("the environment caps the engine's thread count") {
    ::setenv("SILOFACTOR_THREADS", "3", 1);
    CHECK(engine_thread_cap() == 3);
    ::setenv("SILOFACTOR_THREADS", "abc", 1);
    CHECK(engine_thread_cap() == 1);
    ::setenv("SILOFACTOR_THREADS", "0", 1);
    CHECK(engine_thread_cap() == 1);
    ::unsetenv("SILOFACTOR_THREADS");
    CHECK(engine_thread_cap() == 1);
}

TEST_CASE("the disjoint-column fast path") {
    std::mt19937_64 rng(5150);

    SECTION("agrees with the masked path when columns partition cleanly") {
        for (const Scenario kind :
             {Scenario::FullOuterJoin, Scenario::InnerJoin, Scenario::Union}) {
            ts_gen::GenOptions opt;
            opt.kind = kind;
            opt.disjoint_contiguous = true;
            opt.max_rows = 40;
            for (int trial = 0; trial < 25; ++trial) {
                const ts_gen::RandomInstance inst = ts_gen::make_instance(rng, opt);
                const ts_gen::BuiltInstance built = ts_gen::build(inst);
                const LmmRequest req{built.meta, built.data, inst.x};

                const DataMatrix plain = baseline_lmm_disjoint(req);
                const DataMatrix masked = factorized_lmm(req);
                const DataMatrix assembled =
                    matmul(materialize(built.meta, built.data).matrix, inst.x);
                INFO("kind " << to_string(kind) << " trial " << trial);
                CHECK(plain == masked);
                CHECK(plain == assembled);
            }
        }
    }
    SECTION("rejects overlapping column mappings") {
        const Fixture f = patient_fixture();  // sources share columns m and a
        const DataMatrix ones(4, 1, 1.0);
        CHECK_THROWS_AS(baseline_lmm_disjoint(LmmRequest{f.meta, f.data, ones}), NotDisjoint);
    }
    SECTION("rejects source counts other than two") {
        ts_gen::GenOptions opt;
        opt.kind = Scenario::FullOuterJoin;
        opt.max_sources = 3;
        for (int trial = 0; trial < 20; ++trial) {
            const ts_gen::RandomInstance inst = ts_gen::make_instance(rng, opt);
            if (inst.tables.size() != 3) continue;
            const ts_gen::BuiltInstance built = ts_gen::build(inst);
            CHECK_THROWS_AS(baseline_lmm_disjoint(LmmRequest{built.meta, built.data, inst.x}),
                            NotDisjoint);
            return;
        }
        FAIL("no three-source instance generated");
    }
}
