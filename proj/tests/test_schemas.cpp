#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "silofactor/bench.hpp"
#include "silofactor/learner.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/schema_check.hpp"
#include "silofactor/spec_io.hpp"

using namespace silofactor;

namespace {

Json load_schema(const std::string& name) {
    return Json::parse(read_text_file(std::string(SILOFACTOR_SCHEMA_DIR) + "/" + name));
}

std::string running_example_spec() {
    return std::string(SILOFACTOR_DATA_DIR) + "/running_example/spec.json";
}

void expect_valid(const Json& schema, const Json& doc) {
    const auto violations = schema_violations(schema, doc);
    for (const auto& v : violations) UNSCOPED_INFO(v);
    CHECK(violations.empty());
}

}  // namespace

TEST_CASE("the shipped spec schema is the one the loader enforces") {
    const Json shipped = load_schema("integration_spec.schema.json");
    const Json embedded = Json::parse(integration_spec_schema_text());
    CHECK(shipped == embedded);
}

TEST_CASE("schema checker basics") {
    SECTION("type dispatch, including type lists") {
        CHECK(schema_valid(Json{{"type", "string"}}, Json("x")));
        CHECK_FALSE(schema_valid(Json{{"type", "string"}}, Json(3)));
        CHECK(schema_valid(Json{{"type", Json::array({"string", "integer"})}}, Json(3)));
        CHECK(schema_valid(Json{{"type", "number"}}, Json(3)));       // ints are numbers
        CHECK_FALSE(schema_valid(Json{{"type", "integer"}}, Json(3.5)));
        CHECK(schema_valid(Json{{"type", "boolean"}}, Json(true)));
        CHECK(schema_valid(Json{{"type", "null"}}, Json(nullptr)));
    }
    SECTION("enums") {
        const Json schema{{"enum", Json::array({"a", "b"})}};
        CHECK(schema_valid(schema, Json("a")));
        const auto violations = schema_violations(schema, Json("c"));
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("not in") != std::string::npos);
    }
    SECTION("numeric bounds") {
        const Json schema{{"type", "integer"}, {"minimum", 0}, {"maximum", 10}};
        CHECK(schema_valid(schema, Json(5)));
        CHECK_FALSE(schema_valid(schema, Json(-1)));
        CHECK_FALSE(schema_valid(schema, Json(11)));
    }
    SECTION("required and additionalProperties") {
        const Json schema = Json::parse(R"({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {"a": {"type": "integer"}, "b": {"type": "string"}}
        })");
        CHECK(schema_valid(schema, Json{{"a", 1}}));
        CHECK(schema_valid(schema, Json{{"a", 1}, {"b", "x"}}));
        CHECK_FALSE(schema_valid(schema, Json{{"b", "x"}}));       // a missing
        CHECK_FALSE(schema_valid(schema, Json{{"a", 1}, {"z", 2}}));  // z unexpected
    }
    SECTION("array bounds and per-item checks with paths") {
        const Json schema = Json::parse(R"({
            "type": "array",
            "minItems": 2,
            "maxItems": 3,
            "items": {"type": "object", "properties": {"v": {"type": "integer"}}}
        })");
        CHECK(schema_valid(schema, Json::parse(R"([{"v": 1}, {"v": 2}])")));
        CHECK_FALSE(schema_valid(schema, Json::parse(R"([{"v": 1}])")));
        CHECK_FALSE(schema_valid(schema, Json::parse(R"([{}, {}, {}, {}])")));

        const auto violations =
            schema_violations(schema, Json::parse(R"([{"v": 1}, {"v": "oops"}])"));
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("$/1/v") != std::string::npos);
    }
    SECTION("a type mismatch stops deeper checks from cascading") {
        const Json schema = Json::parse(R"({
            "type": "object",
            "required": ["a"],
            "properties": {"a": {"type": "integer"}}
        })");
        const auto violations = schema_violations(schema, Json("not an object"));
        REQUIRE(violations.size() == 1);
    }
}

TEST_CASE("the running example passes the spec schema as a plain document") {
    const Json doc = Json::parse(read_text_file(running_example_spec()));
    expect_valid(load_schema("integration_spec.schema.json"), doc);
}

TEST_CASE("error reports validate") {
    const Json schema = load_schema("error_output.schema.json");
    expect_valid(schema, error_json(ShapeError("bad shape")));
    expect_valid(schema, error_json(ParseError("bad rule", 1, 5)));
    expect_valid(schema, error_json(UnsupportedScenario("two owners")));
    expect_valid(schema, error_json(DivergenceError("loss exploded")));

    Json broken = error_json(ShapeError("bad shape"));
    broken["error"].erase("exit_code");
    CHECK_FALSE(schema_valid(schema, broken));
    broken = error_json(ShapeError("bad shape"));
    broken["error"]["type"] = "SomethingElse";
    CHECK_FALSE(schema_valid(schema, broken));
}

TEST_CASE("metadata reports validate") {
    const SpecPipeline p = run_pipeline(running_example_spec());
    const Json doc = metadata_json(p.meta, p.ts);
    const Json schema = load_schema("metadata_output.schema.json");
    expect_valid(schema, doc);

    Json broken = doc;
    broken["scenario"] = "SidewaysJoin";
    CHECK_FALSE(schema_valid(schema, broken));
    broken = doc;
    broken["sources"][0].erase("ci");
    CHECK_FALSE(schema_valid(schema, broken));
}

TEST_CASE("decision reports validate") {
    const SpecPipeline p = run_pipeline(running_example_spec());
    const CostFeatures features = extract_features(p.meta, p.data, p.spec.options.c_X);
    const Json doc = decision_json(decide(p.ts, features), features);
    const Json schema = load_schema("decision_output.schema.json");
    expect_valid(schema, doc);

    Json broken = doc;
    broken["features"]["tuple_ratio"] = "high";
    CHECK_FALSE(schema_valid(schema, broken));
}

TEST_CASE("train reports validate in both modes") {
    const Json schema = load_schema("train_report.schema.json");

    // Centralized on the full outer join.
    const SpecPipeline outer = run_pipeline(running_example_spec());
    RegressionTask task;
    task.feature_cols = {1, 2};
    task.label_col = 0;
    task.iterations = 3;
    task.learning_rate = 1e-6;
    const MaterializedTarget target = materialize(outer.meta, outer.data);
    expect_valid(schema, train_report_json("centralized", task,
                                           train_centralized(task, target)));

    // Federated on the inner join.
    TgdSet ts;
    ts.sources = {"S1", "S2"};
    ts.target = TargetSchema{"T", {"m", "a", "hr", "o"}};
    ts.tgds.push_back(
        parse_tgd("forall m,n,a,hr,o,dd (S1(m,n,a,hr) & S2(m,n,a,o,dd) -> T(m,a,hr,o))"));
    validate_tgd_set(ts);
    RowMatching matching;
    matching.clusters.push_back(RowCluster{{{1, 3}, {2, 2}}});
    const IntegrationMetadata meta = build_metadata(ts, matching, {4, 3}, {1, 2});
    const std::vector<DataMatrix> data = {
        DataMatrix::from_rows({{1, 34, 72}, {0, 58, 66}, {1, 47, 80}, {0, 29, 75}}),
        DataMatrix::from_rows({{1, 61, 92}, {0, 45, 97}, {0, 29, 95}})};
    RegressionTask fed;
    fed.feature_cols = {0, 1, 3};
    fed.label_col = 2;
    fed.iterations = 3;
    fed.learning_rate = 1e-6;
    expect_valid(schema,
                 train_report_json("federated", fed, train_federated(fed, meta, data)));
}

TEST_CASE("overlap reports validate") {
    OverlapConfig cfg;
    cfg.preset = "desk";
    cfg.source_rows = 60;
    cfg.source_cols = 6;
    cfg.c_X = 3;
    cfg.trials = 1;
    cfg.seed = 7;
    cfg.row_sweep = {0.2};
    cfg.joint_sweep = {0.5};
    const Json doc = overlap_report_json(overlap_sweep(cfg));
    const Json schema = load_schema("overlap_report.schema.json");
    expect_valid(schema, doc);
    REQUIRE(doc.at("rows").size() == 2);
    CHECK(doc.at("rows")[0].at("sweep") == "row");
    CHECK(doc.at("rows")[1].at("sweep") == "joint");

    Json broken = doc;
    broken["rows"][0]["sweep"] = "diagonal";
    CHECK_FALSE(schema_valid(schema, broken));
}

TEST_CASE("decision-suite reports validate") {
    const std::vector<ScenarioInstance> instances = decision_suite(1, 11);
    const AccuracyReport report = accuracy_experiment(instances, 1);
    const Json doc = decisions_report_json(report, 11, 1, 1);
    const Json schema = load_schema("decisions_report.schema.json");
    expect_valid(schema, doc);

    REQUIRE(doc.at("quadrants").size() == 4);
    CHECK(doc.at("scenarios").size() + doc.at("pruned").size() == instances.size());

    Json broken = doc;
    broken["quadrants"].erase(3);
    CHECK_FALSE(schema_valid(schema, broken));
}
