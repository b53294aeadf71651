#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "silofactor/spec_io.hpp"

using namespace silofactor;
namespace fs = std::filesystem;

namespace {

// A private scratch directory, wiped when the test object goes away.
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("silofactor-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        const std::string p = (path / name).string();
        write_text_file(p, content);
        return p;
    }
};

std::string running_example_spec() {
    return std::string(SILOFACTOR_DATA_DIR) + "/running_example/spec.json";
}

}  // namespace

TEST_CASE("numbers print as integers whenever they are integers") {
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(-17.0) == "-17");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(9007199254740992.0) == "9007199254740992");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(-2.25) == "-2.25");

    // Fractional values survive a print-parse round trip exactly.
    for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e-15, 123456.789012345}) {
        const std::string s = format_number(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("csv parsing") {
    SECTION("plain fields") {
        const CsvTable t = parse_csv("a,b\n1,2\n3,4\n", "test");
        CHECK(t.header == std::vector<std::string>{"a", "b"});
        REQUIRE(t.rows.size() == 2);
        CHECK(t.rows[0] == std::vector<std::string>{"1", "2"});
        CHECK(t.rows[1] == std::vector<std::string>{"3", "4"});
    }
    SECTION("missing trailing newline") {
        const CsvTable t = parse_csv("a,b\n1,2", "test");
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0] == std::vector<std::string>{"1", "2"});
    }
    SECTION("quoted fields with commas and doubled quotes") {
        const CsvTable t = parse_csv("name,note\n\"x, y\",\"he said \"\"hi\"\"\"\n", "test");
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0][0] == "x, y");
        CHECK(t.rows[0][1] == "he said \"hi\"");
    }
    SECTION("quoted fields can span lines") {
        const CsvTable t = parse_csv("a,b\n\"line1\nline2\",3\n", "test");
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0][0] == "line1\nline2");
    }
    SECTION("carriage returns are stripped from line ends") {
        const CsvTable t = parse_csv("a,b\r\n1,2\r\n", "test");
        CHECK(t.header == std::vector<std::string>{"a", "b"});
        CHECK(t.rows[0] == std::vector<std::string>{"1", "2"});
    }
    SECTION("ragged rows are rejected") {
        CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", "test"), IngestError);
        CHECK_THROWS_AS(parse_csv("a,b\n1\n", "test"), IngestError);
    }
    SECTION("empty input has no header") {
        CHECK_THROWS_AS(parse_csv("", "test"), IngestError);
    }
    SECTION("unterminated quotes are rejected") {
        CHECK_THROWS_AS(parse_csv("a,b\n\"oops,2\n", "test"), IngestError);
    }
}

TEST_CASE("matrix csv round trip") {
    const DataMatrix m = DataMatrix::from_rows({{1, 2.5}, {-3, 4e-3}});
    const std::string text = matrix_csv(m, {"p", "q"});
    CHECK(text == "p,q\n1,2.5\n-3,0.0040000000000000001\n");

    TempDir dir;
    const std::string path = dir.file("m.csv", text);
    const auto [back, header] = read_matrix_csv(path);
    CHECK(back == m);
    CHECK(header == std::vector<std::string>{"p", "q"});

    CHECK_THROWS_AS(matrix_csv(m, {"p"}), ShapeError);
}

TEST_CASE("loading spec files surfaces precise errors") {
    TempDir dir;

    SECTION("missing file") {
        CHECK_THROWS_AS(load_spec((dir.path / "absent.json").string()), IngestError);
    }
    SECTION("broken json") {
        const std::string p = dir.file("broken.json", "{not json");
        CHECK_THROWS_AS(load_spec(p), SpecError);
    }
    SECTION("schema violations are collected") {
        const std::string p = dir.file("empty.json", "{}");
        try {
            load_spec(p);
            FAIL("expected a spec error");
        } catch (const SpecError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("sources") != std::string::npos);
            CHECK(msg.find("target") != std::string::npos);
            CHECK(msg.find("tgds") != std::string::npos);
        }
    }
    SECTION("csv header must match the declared columns") {
        dir.file("s1.csv", "wrong,a\n1,2\n");
        const std::string p = dir.file("spec.json", R"json({
            "sources": [{"name": "S1", "source_id": 1, "csv_path": "s1.csv",
                         "columns": [{"name": "m", "type": "numeric"},
                                     {"name": "a", "type": "numeric"}]}],
            "target": {"name": "T", "columns": ["m", "a"]},
            "tgds": ["forall m,a (S1(m,a) -> T(m,a))"]
        })json");
        CHECK_THROWS_AS(load_spec(p), IngestError);
    }
    SECTION("duplicate source ids") {
        dir.file("s1.csv", "m\n1\n");
        const std::string p = dir.file("spec.json", R"json({
            "sources": [
                {"name": "S1", "source_id": 1, "csv_path": "s1.csv",
                 "columns": [{"name": "m", "type": "numeric"}]},
                {"name": "S2", "source_id": 1, "csv_path": "s1.csv",
                 "columns": [{"name": "m", "type": "numeric"}]}
            ],
            "target": {"name": "T", "columns": ["m"]},
            "tgds": ["forall m (S1(m) -> T(m))"]
        })json");
        CHECK_THROWS_AS(load_spec(p), SpecError);
    }
}

TEST_CASE("sources are reordered by ascending id") {
    TempDir dir;
    dir.file("a.csv", "p\n1\n");
    dir.file("b.csv", "q\n2\n");
    const std::string p = dir.file("spec.json", R"json({
        "sources": [
            {"name": "B", "source_id": 7, "csv_path": "b.csv",
             "columns": [{"name": "q", "type": "numeric"}]},
            {"name": "A", "source_id": 2, "csv_path": "a.csv",
             "columns": [{"name": "p", "type": "numeric"}]}
        ],
        "target": {"name": "T", "columns": ["p", "q"]},
        "tgds": ["forall p (A(p) -> exists q T(p,q))",
                 "forall q (B(q) -> exists p T(p,q))"]
    })json");
    const IntegrationSpecFile spec = load_spec(p);
    REQUIRE(spec.sources.size() == 2);
    CHECK(spec.sources[0].name == "A");
    CHECK(spec.sources[0].source_id == 2);
    CHECK(spec.sources[1].name == "B");
}

TEST_CASE("the running example drives the whole pipeline") {
    const SpecPipeline p = run_pipeline(running_example_spec());

    CHECK(p.spec.options.c_X == 1);
    CHECK(p.meta.scenario.kind == Scenario::FullOuterJoin);
    CHECK(p.meta.r_T == 6);
    CHECK(p.meta.indicators[0].entries == std::vector<std::int64_t>{3, 0, 1, 2, -1, -1});
    CHECK(p.meta.indicators[1].entries == std::vector<std::int64_t>{2, -1, -1, -1, 0, 1});
    CHECK(p.data[0] ==
          DataMatrix::from_rows({{1, 34, 72}, {0, 58, 66}, {1, 47, 80}, {0, 29, 75}}));
    CHECK(p.data[1] == DataMatrix::from_rows({{1, 61, 92}, {0, 45, 97}, {0, 29, 95}}));
}

TEST_CASE("error reports carry the machine-readable triple") {
    const ShapeError e("rows do not line up");
    const Json j = error_json(e);
    CHECK(j.at("error").at("type") == "ShapeError");
    CHECK(j.at("error").at("exit_code") == 4);
    CHECK(j.at("error").at("message").get<std::string>().find("rows do not line up") !=
          std::string::npos);
}

TEST_CASE("metadata reports mirror the compressed vectors") {
    const SpecPipeline p = run_pipeline(running_example_spec());
    const Json j = metadata_json(p.meta, p.ts);

    CHECK(j.at("scenario") == "FullOuterJoin");
    CHECK(j.at("r_T") == 6);
    CHECK(j.at("c_T") == 4);
    REQUIRE(j.at("sources").size() == 2);
    const Json& s1 = j.at("sources")[0];
    CHECK(s1.at("source_id") == 1);
    CHECK(s1.at("ci") == Json({3, 0, 1, 2, -1, -1}));
    CHECK(s1.at("cm") == Json({0, 1, 2, -1}));
    CHECK(s1.at("mapped_target_columns") == Json({"m", "a", "hr"}));
    REQUIRE(s1.at("redundancy").size() == 6);
    CHECK(j.at("sources")[1].at("redundancy")[0] == Json({0, 0, 1, 1}));
}

TEST_CASE("train reports track the task and the trace") {
    const SpecPipeline p = run_pipeline(running_example_spec());
    RegressionTask task;
    task.feature_cols = {1, 2};
    task.label_col = 0;
    task.iterations = 2;
    task.learning_rate = 1e-6;

    const MaterializedTarget target = materialize(p.meta, p.data);
    const TrainResult r = train_centralized(task, target);
    const Json j = train_report_json("centralized", task, r);

    CHECK(j.at("mode") == "centralized");
    CHECK(j.at("iterations") == 2);
    CHECK(j.at("label_col") == 0);
    CHECK(j.at("feature_columns") == Json({1, 2}));
    CHECK(j.at("loss").size() == 3);
    CHECK(j.at("weights").size() == 2);
    CHECK(j.at("final_loss") == r.loss.back());
}
