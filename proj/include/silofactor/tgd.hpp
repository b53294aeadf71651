#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/types.hpp"

namespace silofactor {

// ---------------------------------------------------------------------------
// Schema-mapping rules.
//
// A rule relates source relations to the target relation:
//
//   rule    := 'forall' varlist '(' lhs '->' rhs ')'
//   lhs     := atom ('&' atom)*
//   rhs     := ['exists' varlist] atom
//   atom    := ident '(' [varlist] ')'
//   varlist := ident (',' ident)*
//
// Variables are positional: the variable at position p of a source atom
// stands for column p of that source, and the variable at position i of the
// target atom stands for target column i.  A variable shared between a
// source atom and the target atom therefore maps that source column to that
// target column; a variable shared by two source atoms marks an overlapped
// column.  Existential variables mark target columns the rule says nothing
// about.
// ---------------------------------------------------------------------------

struct TgdAtom {
    std::string relation;
    std::vector<std::string> variables;
};

struct Tgd {
    std::vector<std::string> universal_vars;
    std::vector<TgdAtom> lhs_atoms;
    std::vector<std::string> existential_vars;
    TgdAtom rhs_atom;
    std::string raw_text;
};

// No existential variables: the rule pins down every target column it emits.
inline bool is_full(const Tgd& t) { return t.existential_vars.empty(); }

// Exactly one source atom on the left-hand side.
inline bool is_singleton_lhs(const Tgd& t) { return t.lhs_atoms.size() == 1; }

namespace detail {

struct Token {
    enum Kind { Ident, LParen, RParen, Comma, Amp, Arrow, End } kind = End;
    std::string text;
    std::size_t line = 1, column = 1;
};

class TgdLexer {
public:
    explicit TgdLexer(const std::string& text) : text_(text) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= text_.size()) {
            t.kind = Token::End;
            return t;
        }
        const char c = text_[pos_];
        if (c == '(') return advance(t, Token::LParen, 1);
        if (c == ')') return advance(t, Token::RParen, 1);
        if (c == ',') return advance(t, Token::Comma, 1);
        if (c == '&') return advance(t, Token::Amp, 1);
        if (c == '-') {
            if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') return advance(t, Token::Arrow, 2);
            throw ParseError("expected '->'", line_, column_);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
                ++column_;
            }
            t.kind = Token::Ident;
            t.text = text_.substr(start, pos_ - start);
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
    }

private:
    Token advance(Token t, Token::Kind kind, std::size_t len) {
        t.kind = kind;
        t.text = text_.substr(pos_, len);
        pos_ += len;
        column_ += len;
        return t;
    }

    void skip_ws() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                column_ = 1;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++column_;
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1, column_ = 1;
};

class TgdParser {
public:
    explicit TgdParser(const std::string& text) : lexer_(text) { shift(); }

    Tgd parse() {
        Tgd out;
        expect_keyword("forall");
        out.universal_vars = parse_varlist();
        expect(Token::LParen, "'('");
        out.lhs_atoms.push_back(parse_atom());
        while (cur_.kind == Token::Amp) {
            shift();
            out.lhs_atoms.push_back(parse_atom());
        }
        expect(Token::Arrow, "'->'");
        if (cur_.kind == Token::Ident && cur_.text == "exists") {
            shift();
            out.existential_vars = parse_varlist();
        }
        out.rhs_atom = parse_atom();
        expect(Token::RParen, "')'");
        if (cur_.kind != Token::End)
            throw ParseError("trailing input after rule", cur_.line, cur_.column);
        return out;
    }

private:
    void shift() { cur_ = lexer_.next(); }

    void expect(Token::Kind kind, const char* what) {
        if (cur_.kind != kind)
            throw ParseError(std::string("expected ") + what, cur_.line, cur_.column);
        shift();
    }

    void expect_keyword(const char* kw) {
        if (cur_.kind != Token::Ident || cur_.text != kw)
            throw ParseError(std::string("expected '") + kw + "'", cur_.line, cur_.column);
        shift();
    }

    std::string expect_ident() {
        if (cur_.kind != Token::Ident)
            throw ParseError("expected identifier", cur_.line, cur_.column);
        std::string name = cur_.text;
        shift();
        return name;
    }

    std::vector<std::string> parse_varlist() {
        std::vector<std::string> vars;
        vars.push_back(expect_ident());
        while (cur_.kind == Token::Comma) {
            shift();
            vars.push_back(expect_ident());
        }
        return vars;
    }

    TgdAtom parse_atom() {
        TgdAtom atom;
        atom.relation = expect_ident();
        expect(Token::LParen, "'('");
        if (cur_.kind != Token::RParen) atom.variables = parse_varlist();
        expect(Token::RParen, "')'");
        return atom;
    }

    TgdLexer lexer_;
    Token cur_;
};

}  // namespace detail

// Parses one rule and checks its variable discipline: every variable used in
// an atom is declared, existential variables appear only on the right-hand
// side, and every right-hand-side variable is either existential or occurs in
// some left-hand-side atom.
inline Tgd parse_tgd(const std::string& text) {
    Tgd t = detail::TgdParser(text).parse();
    t.raw_text = text;

    std::unordered_set<std::string> universal(t.universal_vars.begin(), t.universal_vars.end());
    if (universal.size() != t.universal_vars.size())
        throw ParseError("duplicate variable in forall list", 1, 1);
    std::unordered_set<std::string> existential(t.existential_vars.begin(),
                                                t.existential_vars.end());
    if (existential.size() != t.existential_vars.size())
        throw ParseError("duplicate variable in exists list", 1, 1);
    for (const auto& v : t.existential_vars)
        if (universal.count(v))
            throw ParseError("variable '" + v + "' declared both forall and exists", 1, 1);

    std::unordered_set<std::string> lhs_vars;
    for (const auto& atom : t.lhs_atoms) {
        for (const auto& v : atom.variables) {
            if (existential.count(v))
                throw ParseError("existential variable '" + v + "' used on the left-hand side",
                                 1, 1);
            if (!universal.count(v))
                throw ParseError("undeclared variable '" + v + "'", 1, 1);
            lhs_vars.insert(v);
        }
    }
    for (const auto& v : t.rhs_atom.variables) {
        if (existential.count(v)) continue;
        if (!universal.count(v))
            throw ParseError("undeclared variable '" + v + "'", 1, 1);
        if (!lhs_vars.count(v))
            throw ParseError("variable '" + v +
                             "' appears on the right-hand side but in no source atom",
                             1, 1);
    }
    return t;
}

inline std::string print_tgd(const Tgd& t) {
    auto join = [](const std::vector<std::string>& parts) {
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) out += ",";
            out += parts[i];
        }
        return out;
    };
    auto atom_str = [&](const TgdAtom& a) { return a.relation + "(" + join(a.variables) + ")"; };

    std::string out = "forall " + join(t.universal_vars) + " (";
    for (std::size_t i = 0; i < t.lhs_atoms.size(); ++i) {
        if (i) out += " & ";
        out += atom_str(t.lhs_atoms[i]);
    }
    out += " -> ";
    if (!t.existential_vars.empty()) out += "exists " + join(t.existential_vars) + " ";
    out += atom_str(t.rhs_atom);
    out += ")";
    return out;
}

// ---------------------------------------------------------------------------
// Rule sets and their derived structure.
// ---------------------------------------------------------------------------

enum class Scenario { FullOuterJoin, InnerJoin, LeftJoin, Union };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::FullOuterJoin: return "FullOuterJoin";
        case Scenario::InnerJoin: return "InnerJoin";
        case Scenario::LeftJoin: return "LeftJoin";
        case Scenario::Union: return "Union";
    }
    return "?";
}

struct ScenarioKind {
    Scenario kind = Scenario::Union;
    // Index into TgdSet::sources of the side whose rows all survive;
    // set for LeftJoin only.
    std::optional<std::size_t> base_index;
};

// All rules of one integration, plus the relations they may talk about.
// `sources` is ordered by ascending source_id of the underlying tables, and
// per-source vectors derived from a TgdSet follow that order.
struct TgdSet {
    std::vector<Tgd> tgds;
    std::vector<std::string> sources;
    TargetSchema target;

    std::optional<std::size_t> source_index(const std::string& relation) const {
        for (std::size_t i = 0; i < sources.size(); ++i)
            if (sources[i] == relation) return i;
        return std::nullopt;
    }
};

// Structural checks that do not depend on table contents: relation names are
// declared, the target atom has full arity, a relation keeps one arity across
// all rules, and no rule joins a relation with itself.
inline void validate_tgd_set(const TgdSet& ts) {
    std::unordered_map<std::string, std::size_t> arity;
    for (const auto& t : ts.tgds) {
        if (t.rhs_atom.relation != ts.target.name)
            throw UnknownRelation("rule targets '" + t.rhs_atom.relation + "', expected '" +
                                  ts.target.name + "'");
        if (t.rhs_atom.variables.size() != ts.target.column_count())
            throw InconsistentMapping(
                "target atom has " + std::to_string(t.rhs_atom.variables.size()) +
                " variables, target has " + std::to_string(ts.target.column_count()) +
                " columns");
        std::unordered_set<std::string> seen_in_rule;
        for (const auto& atom : t.lhs_atoms) {
            if (!ts.source_index(atom.relation))
                throw UnknownRelation("undeclared relation '" + atom.relation + "'");
            if (!seen_in_rule.insert(atom.relation).second)
                throw UnsupportedScenario("relation '" + atom.relation +
                                          "' appears twice in one rule (self-join)");
            auto [it, inserted] = arity.emplace(atom.relation, atom.variables.size());
            if (!inserted && it->second != atom.variables.size())
                throw InconsistentMapping("relation '" + atom.relation +
                                          "' used with arities " + std::to_string(it->second) +
                                          " and " + std::to_string(atom.variables.size()));
        }
    }
}

// Column mapping of one source, as derived from the rules.
//   cm:             target column -> column of the projected matrix D_k
//   source_columns: column of D_k -> column of the raw source table
// D_k columns are ordered by ascending target column, so cm's non-negative
// entries are increasing.
struct SourceMapping {
    CompressedMapping cm;
    std::vector<std::size_t> source_columns;
};

// Walks every rule and collects, per source, the target-column/source-column
// pairs implied by shared variables.  The collected relation must be
// one-to-one per source.
inline std::vector<SourceMapping> derive_column_mappings(const TgdSet& ts) {
    validate_tgd_set(ts);
    const std::size_t c_T = ts.target.column_count();

    // Per source: target position -> raw source column.
    std::vector<std::map<std::size_t, std::size_t>> by_target(ts.sources.size());

    for (const auto& t : ts.tgds) {
        // Target positions of each universal variable in this rule.
        std::unordered_map<std::string, std::vector<std::size_t>> target_pos;
        for (std::size_t i = 0; i < t.rhs_atom.variables.size(); ++i)
            target_pos[t.rhs_atom.variables[i]].push_back(i);

        for (const auto& atom : t.lhs_atoms) {
            const std::size_t k = *ts.source_index(atom.relation);
            for (std::size_t p = 0; p < atom.variables.size(); ++p) {
                auto it = target_pos.find(atom.variables[p]);
                if (it == target_pos.end()) continue;  // unmapped source column
                if (it->second.size() > 1)
                    throw InconsistentMapping("variable '" + atom.variables[p] +
                                              "' maps one source column to " +
                                              std::to_string(it->second.size()) +
                                              " target columns");
                const std::size_t i = it->second.front();
                auto [pos, inserted] = by_target[k].emplace(i, p);
                if (!inserted && pos->second != p)
                    throw InconsistentMapping(
                        "target column " + std::to_string(i) + " mapped from columns " +
                        std::to_string(pos->second) + " and " + std::to_string(p) +
                        " of source '" + atom.relation + "'");
            }
        }
    }

    std::vector<SourceMapping> out(ts.sources.size());
    for (std::size_t k = 0; k < ts.sources.size(); ++k) {
        // One raw column may not feed two target columns.
        std::unordered_set<std::size_t> raw_cols;
        for (const auto& [i, p] : by_target[k])
            if (!raw_cols.insert(p).second)
                throw InconsistentMapping("column " + std::to_string(p) + " of source '" +
                                          ts.sources[k] +
                                          "' mapped to two target columns");
        out[k].cm.entries.assign(c_T, kUnmapped);
        for (const auto& [i, p] : by_target[k]) {  // std::map: ascending target column
            out[k].cm.entries[i] = static_cast<std::int64_t>(out[k].source_columns.size());
            out[k].source_columns.push_back(p);
        }
    }
    return out;
}

// Classifies the rule set into one of the four supported integration shapes.
//
// With J = rules joining several sources and U = sources owning a
// single-source rule:
//   J nonempty, U = all sources      -> FullOuterJoin
//   J nonempty, U empty              -> InnerJoin
//   J nonempty, U = exactly one      -> LeftJoin (base = the U member)
//   J empty,    U = all sources      -> Union
// Anything else is rejected.
inline ScenarioKind derive_scenario(const TgdSet& ts) {
    validate_tgd_set(ts);
    if (ts.tgds.empty()) throw UnsupportedScenario("rule set is empty");

    bool any_join = false;
    std::set<std::size_t> singleton_owners;
    std::set<std::size_t> mentioned;
    for (const auto& t : ts.tgds) {
        if (is_singleton_lhs(t))
            singleton_owners.insert(*ts.source_index(t.lhs_atoms.front().relation));
        else
            any_join = true;
        for (const auto& atom : t.lhs_atoms) mentioned.insert(*ts.source_index(atom.relation));
    }
    if (mentioned.size() != ts.sources.size())
        throw UnsupportedScenario("some source appears in no rule");

    const std::size_t n = ts.sources.size();
    if (any_join) {
        if (singleton_owners.size() == n) return {Scenario::FullOuterJoin, std::nullopt};
        if (singleton_owners.empty()) return {Scenario::InnerJoin, std::nullopt};
        if (singleton_owners.size() == 1)
            return {Scenario::LeftJoin, *singleton_owners.begin()};
        throw UnsupportedScenario(
            "several (but not all) sources own single-source rules; no single base side");
    }
    if (singleton_owners.size() == n) return {Scenario::Union, std::nullopt};
    throw UnsupportedScenario("no joining rule and some source owns no single-source rule");
}

// Sources that participate in at least one multi-source rule; only their rows
// may appear in row-matching clusters.
inline std::vector<bool> joined_sources(const TgdSet& ts) {
    std::vector<bool> joined(ts.sources.size(), false);
    for (const auto& t : ts.tgds) {
        if (is_singleton_lhs(t)) continue;
        for (const auto& atom : t.lhs_atoms) joined[*ts.source_index(atom.relation)] = true;
    }
    return joined;
}

// Sources owning a single-source rule; their unmatched rows survive into the
// target.
inline std::vector<bool> singleton_owner_sources(const TgdSet& ts) {
    std::vector<bool> owners(ts.sources.size(), false);
    for (const auto& t : ts.tgds)
        if (is_singleton_lhs(t)) owners[*ts.source_index(t.lhs_atoms.front().relation)] = true;
    return owners;
}

}  // namespace silofactor
