#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "silofactor/cost.hpp"
#include "silofactor/errors.hpp"
#include "silofactor/learner.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"
#include "silofactor/schema_check.hpp"
#include "silofactor/tgd.hpp"
#include "silofactor/types.hpp"

namespace silofactor {

// ---------------------------------------------------------------------------
// Number and CSV formatting.
// ---------------------------------------------------------------------------

// Values that are exact integers print without a decimal point, so outputs
// computed along different paths compare byte-for-byte on integer data.
inline std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9007199254740992.0) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Parses comma-separated text with a mandatory header row.  Fields may be
// double-quoted; doubled quotes inside a quoted field are literal quotes, and
// quoted fields may span lines.
inline CsvTable parse_csv(const std::string& text, const std::string& where) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&]() {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw IngestError(where + ": unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();

    if (records.empty()) throw IngestError(where + ": missing header row");
    CsvTable out;
    out.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != out.header.size())
            throw IngestError(where + ": row " + std::to_string(r) + " has " +
                              std::to_string(records[r].size()) + " fields, header has " +
                              std::to_string(out.header.size()));
        out.rows.push_back(std::move(records[r]));
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

// A matrix as CSV text: header row, then one formatted row per matrix row.
inline std::string matrix_csv(const DataMatrix& m, const std::vector<std::string>& header) {
    if (header.size() != m.cols())
        throw ShapeError("csv header has " + std::to_string(header.size()) + " names for " +
                         std::to_string(m.cols()) + " columns");
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            out += format_number(m(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

// Reads a fully numeric CSV (header required, values parsed as doubles).
inline std::pair<DataMatrix, std::vector<std::string>> read_matrix_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    DataMatrix m(csv.rows.size(), csv.header.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i)
        for (std::size_t j = 0; j < csv.header.size(); ++j)
            m(i, j) = detail::parse_numeric_cell(csv.rows[i][j],
                                                 "'" + csv.header[j] + "' of '" + path + "'");
    return {std::move(m), csv.header};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write '" + path + "'");
    out << content;
    if (!out) throw SpecError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// The integration spec file.
// ---------------------------------------------------------------------------

struct SpecOptions {
    std::size_t c_X = 1;
    std::uint64_t seed = 0;
    std::size_t trials = 3;
};

struct IntegrationSpecFile {
    TargetSchema target;
    std::vector<SourceTable> sources;  // ascending source_id, CSV data loaded
    std::vector<std::string> tgds;     // rule texts
    RowMatching row_matchings;
    std::optional<int> base_source;
    SpecOptions options;
};

// The published schema for spec files, embedded so validation never depends
// on an install location.  schemas/integration_spec.schema.json ships the
// same document.
inline const char* integration_spec_schema_text() {
    return R"SCHEMA({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "IntegrationSpec",
  "description": "Declares source tables, the target schema, mapping rules, and row matchings for one integration scenario. Row indices are 0-based.",
  "type": "object",
  "required": ["target", "sources", "tgds"],
  "additionalProperties": false,
  "properties": {
    "target": {
      "type": "object",
      "required": ["name", "columns"],
      "additionalProperties": false,
      "properties": {
        "name": {"type": "string"},
        "columns": {"type": "array", "minItems": 1, "items": {"type": "string"}}
      }
    },
    "sources": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "required": ["name", "source_id", "csv_path", "columns"],
        "additionalProperties": false,
        "properties": {
          "name": {"type": "string"},
          "source_id": {"type": "integer", "minimum": 1},
          "csv_path": {"type": "string"},
          "columns": {
            "type": "array",
            "minItems": 1,
            "items": {
              "type": "object",
              "required": ["name", "type"],
              "additionalProperties": false,
              "properties": {
                "name": {"type": "string"},
                "type": {"enum": ["numeric", "categorical"]}
              }
            }
          }
        }
      }
    },
    "tgds": {"type": "array", "minItems": 1, "items": {"type": "string"}},
    "row_matchings": {
      "type": "array",
      "items": {
        "type": "array",
        "minItems": 2,
        "items": {
          "type": "array",
          "minItems": 2,
          "maxItems": 2,
          "items": {"type": "integer", "minimum": 0}
        }
      }
    },
    "base_source": {"type": "integer", "minimum": 1},
    "options": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "c_X": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1}
      }
    }
  }
})SCHEMA";
}

inline const Json& integration_spec_schema() {
    static const Json schema = Json::parse(integration_spec_schema_text());
    return schema;
}

// Interprets an already-parsed spec document.  CSV paths resolve relative to
// `base_dir`.  The document is checked against the published schema before
// anything else happens.
inline IntegrationSpecFile parse_spec(const Json& doc, const std::string& base_dir) {
    const std::vector<std::string> violations = schema_violations(integration_spec_schema(), doc);
    if (!violations.empty()) {
        std::string msg = "spec does not match its schema:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw SpecError(msg);
    }

    IntegrationSpecFile spec;
    spec.target.name = doc.at("target").at("name").get<std::string>();
    for (const auto& col : doc.at("target").at("columns"))
        spec.target.columns.push_back(col.get<std::string>());
    spec.target.validate();

    for (const auto& src : doc.at("sources")) {
        SourceTable table;
        table.name = src.at("name").get<std::string>();
        table.source_id = src.at("source_id").get<int>();
        for (const auto& col : src.at("columns"))
            table.columns.push_back({col.at("name").get<std::string>(),
                                     col.at("type").get<std::string>() == "numeric"
                                         ? ColumnType::Numeric
                                         : ColumnType::Categorical});

        std::filesystem::path csv_path = src.at("csv_path").get<std::string>();
        if (csv_path.is_relative()) csv_path = std::filesystem::path(base_dir) / csv_path;
        const CsvTable csv = read_csv(csv_path.string());
        if (csv.header.size() != table.columns.size())
            throw IngestError("'" + csv_path.string() + "': header has " +
                              std::to_string(csv.header.size()) + " columns, source '" +
                              table.name + "' declares " + std::to_string(table.columns.size()));
        for (std::size_t j = 0; j < csv.header.size(); ++j)
            if (csv.header[j] != table.columns[j].name)
                throw IngestError("'" + csv_path.string() + "': header column " +
                                  std::to_string(j) + " is '" + csv.header[j] +
                                  "', source '" + table.name + "' declares '" +
                                  table.columns[j].name + "'");
        for (const auto& row : csv.rows) {
            std::vector<Cell> cells;
            cells.reserve(row.size());
            for (const auto& value : row) cells.emplace_back(value);
            table.rows.push_back(std::move(cells));
        }
        table.validate();
        spec.sources.push_back(std::move(table));
    }
    std::sort(spec.sources.begin(), spec.sources.end(),
              [](const SourceTable& a, const SourceTable& b) { return a.source_id < b.source_id; });
    for (std::size_t k = 1; k < spec.sources.size(); ++k)
        if (spec.sources[k].source_id == spec.sources[k - 1].source_id)
            throw SpecError("duplicate source_id " + std::to_string(spec.sources[k].source_id));

    for (const auto& rule : doc.at("tgds")) spec.tgds.push_back(rule.get<std::string>());

    if (doc.contains("row_matchings"))
        for (const auto& cluster : doc.at("row_matchings")) {
            RowCluster rc;
            for (const auto& member : cluster) {
                const int sid = member.at(0).get<int>();
                if (sid < 1) throw SpecError("matching member source_id must be >= 1");
                rc.members.emplace_back(sid, member.at(1).get<std::size_t>());
            }
            spec.row_matchings.clusters.push_back(std::move(rc));
        }

    if (doc.contains("base_source")) spec.base_source = doc.at("base_source").get<int>();
    if (doc.contains("options")) {
        const Json& opt = doc.at("options");
        if (opt.contains("c_X")) spec.options.c_X = opt.at("c_X").get<std::size_t>();
        if (opt.contains("seed")) spec.options.seed = opt.at("seed").get<std::uint64_t>();
        if (opt.contains("trials")) spec.options.trials = opt.at("trials").get<std::size_t>();
    }
    return spec;
}

inline IntegrationSpecFile load_spec(const std::string& path) {
    const std::string text = read_text_file(path);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw SpecError("'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_spec(doc, std::filesystem::path(path).parent_path().string());
}

// Parses and validates the rule texts against the declared relations.
inline TgdSet tgd_set_from_spec(const IntegrationSpecFile& spec) {
    TgdSet ts;
    ts.target = spec.target;
    for (const auto& table : spec.sources) ts.sources.push_back(table.name);
    for (const auto& text : spec.tgds) ts.tgds.push_back(parse_tgd(text));
    validate_tgd_set(ts);
    return ts;
}

// Everything the execution commands need, derived in one go.
struct SpecPipeline {
    IntegrationSpecFile spec;
    TgdSet ts;
    IntegrationMetadata meta;
    std::vector<DataMatrix> data;  // projected source matrices D_k
};

inline SpecPipeline run_pipeline(const std::string& path, bool dense_redundancy = true) {
    SpecPipeline p;
    p.spec = load_spec(path);
    p.ts = tgd_set_from_spec(p.spec);
    MetadataOptions options;
    options.base_source = p.spec.base_source;
    options.dense_redundancy = dense_redundancy;
    p.meta = build_metadata(p.ts, p.spec.row_matchings, p.spec.sources, options);
    for (std::size_t k = 0; k < p.spec.sources.size(); ++k)
        p.data.push_back(project_source(p.spec.sources[k], p.meta.mappings[k]));
    return p;
}

// ---------------------------------------------------------------------------
// JSON output shapes.  Every emitter here has a published schema under
// schemas/ and the test suite validates real outputs against those files.
// ---------------------------------------------------------------------------

inline Json error_json(const Error& e) {
    return Json{{"error",
                 {{"type", e.kind()}, {"message", e.what()}, {"exit_code", e.exit_code()}}}};
}

inline Json features_json(const CostFeatures& f) {
    return Json{{"n_sources", f.n_sources},
                {"source_rows", f.source_rows},
                {"source_cols", f.source_cols},
                {"r_T", f.r_T},
                {"c_T", f.c_T},
                {"c_X", f.c_X},
                {"row_overlap", f.row_overlap},
                {"col_overlap", f.col_overlap},
                {"tuple_ratio", f.tuple_ratio},
                {"feature_ratio", f.feature_ratio},
                {"redundancy_in_sources", f.redundancy_in_sources},
                {"intra_source_duplicate_rows", f.intra_source_duplicate_rows},
                {"redundancy_in_target", f.redundancy_in_target}};
}

inline Json metadata_json(const IntegrationMetadata& meta, const TgdSet& ts) {
    Json sources = Json::array();
    for (std::size_t k = 0; k < meta.n_sources(); ++k) {
        Json redundancy = Json::array();
        if (k < meta.redundancies.size()) {
            const DataMatrix& r = meta.redundancies[k];
            for (std::size_t i = 0; i < r.rows(); ++i) {
                Json row = Json::array();
                for (std::size_t j = 0; j < r.cols(); ++j)
                    row.push_back(static_cast<int>(r(i, j)));
                redundancy.push_back(std::move(row));
            }
        }
        Json mapped_cols = Json::array();
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (meta.maps_col(k, j)) mapped_cols.push_back(ts.target.columns[j]);
        sources.push_back(Json{{"source_id", meta.source_ids[k]},
                               {"name", ts.sources[k]},
                               {"rows", meta.source_rows[k]},
                               {"cm", meta.mappings[k].cm.entries},
                               {"ci", meta.indicators[k].entries},
                               {"source_columns", meta.mappings[k].source_columns},
                               {"mapped_target_columns", std::move(mapped_cols)},
                               {"redundancy", std::move(redundancy)}});
    }
    Json out{{"scenario", to_string(meta.scenario.kind)},
             {"base_source", meta.base_source()},
             {"r_T", meta.r_T},
             {"c_T", meta.c_T},
             {"target_columns", ts.target.columns},
             {"sources", std::move(sources)}};
    return out;
}

inline Json decision_json(const Decision& d, const CostFeatures& f) {
    return Json{{"choice", to_string(d.choice)},
                {"reason", to_string(d.reason)},
                {"est_flops_fact", d.est_flops_fact},
                {"est_flops_mat", d.est_flops_mat},
                {"features", features_json(f)}};
}

inline Json train_report_json(const std::string& mode, const RegressionTask& task,
                              const TrainResult& result) {
    Json parties = Json::array();
    for (const auto& p : result.parties)
        parties.push_back(Json{{"source_id", p.source_id},
                               {"feature_columns", p.feature_cols},
                               {"weights", p.theta}});
    return Json{{"mode", mode},
                {"iterations", task.iterations},
                {"learning_rate", task.learning_rate},
                {"label_col", task.label_col},
                {"feature_columns", result.feature_cols},
                {"loss", result.loss},
                {"final_loss", result.final_loss()},
                {"weights", result.weights},
                {"parties", std::move(parties)},
                {"messages_exchanged", result.messages_exchanged}};
}

inline Json scenario_outcome_json(const ScenarioOutcome& o) {
    return Json{{"scenario_id", o.label},
                {"features", features_json(o.features)},
                {"decision", to_string(o.decision.choice)},
                {"reason", to_string(o.decision.reason)},
                {"est_flops_fact", o.decision.est_flops_fact},
                {"est_flops_mat", o.decision.est_flops_mat},
                {"measured_fact_ms", o.measured_fact_ms},
                {"measured_mat_ms", o.measured_mat_ms},
                {"ground_truth", to_string(o.ground_truth)},
                {"correct", o.correct}};
}

inline Json quadrant_json(const QuadrantStats& q) {
    return Json{{"redundancy_in_sources", q.redundancy_in_sources},
                {"redundancy_in_target", q.redundancy_in_target},
                {"count", q.count},
                {"correct", q.correct},
                {"accuracy", q.accuracy()}};
}

inline Json decisions_report_json(const AccuracyReport& report, std::uint64_t seed,
                                  std::size_t trials, std::size_t per_quadrant) {
    Json scenarios = Json::array();
    for (const auto& o : report.outcomes) scenarios.push_back(scenario_outcome_json(o));
    Json pruned = Json::array();
    for (const auto& o : report.pruned) pruned.push_back(scenario_outcome_json(o));
    Json quadrants = Json::array();
    for (const auto& q : report.quadrants) quadrants.push_back(quadrant_json(q));
    Json alt = Json::array();
    for (const auto& q : report.quadrants_overlap_reading) alt.push_back(quadrant_json(q));
    return Json{{"seed", seed},
                {"trials", trials},
                {"per_quadrant", per_quadrant},
                {"scenarios", std::move(scenarios)},
                {"pruned", std::move(pruned)},
                {"quadrants", std::move(quadrants)},
                {"quadrants_overlap_interpretation", std::move(alt)}};
}

// Fixed-width text view of the quadrant accuracies, for terminals.
inline std::string decisions_table_text(const AccuracyReport& report) {
    std::ostringstream out;
    out << "redundancy_in_sources  redundancy_in_target  scenarios  correct  accuracy\n";
    for (const auto& q : report.quadrants) {
        char line[96];
        std::snprintf(line, sizeof line, "%-21s  %-20s  %9zu  %7zu  %7.1f%%\n",
                      q.redundancy_in_sources ? "yes" : "no",
                      q.redundancy_in_target ? "yes" : "no", q.count, q.correct,
                      100.0 * q.accuracy());
        out << line;
    }
    return out.str();
}

}  // namespace silofactor
