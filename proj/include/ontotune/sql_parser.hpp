#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ontotune/common.hpp"
#include "ontotune/types.hpp"

namespace ontotune {

struct UnsupportedStatementError : ParseError {
  UnsupportedStatementError(const std::string& msg, int line, int col) : ParseError(msg, line, col) {}
};

/// Everything the feature layer needs from one statement of the supported
/// SELECT subset (see docs/sql_subset.md). Identifiers are lower-cased and
/// aliases resolved to base table names, so two queries that differ only in
/// alias spelling produce identical ParsedQuery values.
struct ParsedQuery {
  std::set<std::string> tables;
  std::set<ColumnRef> columns;
  int join_count = 0;
  int subquery_count = 0;
  int group_by_count = 0;
  bool has_distinct = false;
  bool has_window = false;
  bool has_like = false;
  bool has_order_by = false;
  std::set<ColumnRef> in_where;
  std::set<ColumnRef> in_join;
  std::set<ColumnRef> in_orderby;

  std::vector<std::string> table_list() const { return {tables.begin(), tables.end()}; }
  std::vector<ColumnRef> column_list() const { return {columns.begin(), columns.end()}; }
};

namespace sqldetail {

enum class TokKind { Ident, Keyword, Number, String, Symbol, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;  // lower-case for idents/keywords
  int line = 1;
  int col = 1;
};

inline const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = {
      "select", "distinct", "from", "where", "group",  "by",   "order",     "limit",
      "join",   "inner",    "left", "right", "full",   "outer", "cross",    "on",
      "and",    "or",       "not",  "like",  "in",     "is",    "null",     "exists",
      "between", "as",      "asc",  "desc",  "over",   "partition"};
  return kw;
}

class Lexer {
public:
  explicit Lexer(const std::string& sql) : src_(sql) { tokenize(); }

  const std::vector<Token>& tokens() const { return toks_; }

private:
  void tokenize() {
    std::size_t i = 0;
    int line = 1, col = 1;
    auto advance = [&](std::size_t n) {
      for (std::size_t k = 0; k < n; ++k) {
        if (src_[i + k] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      i += n;
    };
    while (i < src_.size()) {
      char c = src_[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
        continue;
      }
      int tl = line, tc = col;
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
          ++j;
        std::string word = src_.substr(i, j - i);
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        bool kw = keywords().count(word) > 0;
        toks_.push_back({kw ? TokKind::Keyword : TokKind::Ident, word, tl, tc});
        advance(j - i);
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && i + 1 < src_.size() &&
                  std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
        std::size_t j = i;
        while (j < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[j])) ||
                                   src_[j] == '.' || src_[j] == 'e' || src_[j] == 'E' ||
                                   ((src_[j] == '+' || src_[j] == '-') && j > i &&
                                    (src_[j - 1] == 'e' || src_[j - 1] == 'E'))))
          ++j;
        toks_.push_back({TokKind::Number, src_.substr(i, j - i), tl, tc});
        advance(j - i);
      } else if (c == '\'') {
        std::size_t j = i + 1;
        std::string value;
        bool closed = false;
        while (j < src_.size()) {
          if (src_[j] == '\'') {
            if (j + 1 < src_.size() && src_[j + 1] == '\'') {
              value += '\'';
              j += 2;
              continue;
            }
            closed = true;
            ++j;
            break;
          }
          value += src_[j];
          ++j;
        }
        if (!closed) throw ParseError("unterminated string literal", tl, tc);
        toks_.push_back({TokKind::String, value, tl, tc});
        advance(j - i);
      } else {
        static const char* two[] = {"<=", ">=", "<>", "!="};
        std::string sym(1, c);
        if (i + 1 < src_.size()) {
          std::string pair = src_.substr(i, 2);
          for (const char* t : two)
            if (pair == t) sym = pair;
        }
        static const std::string singles = "(),.*=<>+-/;%";
        if (sym.size() == 1 && singles.find(c) == std::string::npos)
          throw ParseError(std::string("unexpected character '") + c + "'", tl, tc);
        toks_.push_back({TokKind::Symbol, sym, tl, tc});
        advance(sym.size());
      }
    }
    toks_.push_back({TokKind::End, "", line, col});
  }

  std::string src_;
  std::vector<Token> toks_;
};

enum class RefContext { Plain, Where, Join, OrderBy, GroupBy };

struct PendingRef {
  std::string qualifier;  // empty when unqualified
  std::string name;
  int scope;
  RefContext ctx;
  int line;
  int col;
};

struct Scope {
  int parent = -1;
  std::map<std::string, std::string> aliases;  // alias or base name -> base table
  std::vector<std::string> tables;             // base names, FROM order
};

class Parser {
public:
  explicit Parser(const std::string& sql) : lex_(sql), toks_(lex_.tokens()) {}

  ParsedQuery parse() {
    if (peek().kind == TokKind::End) throw ParseError("empty statement", 1, 1);
    if (!is_kw("select")) {
      const Token& t = peek();
      throw UnsupportedStatementError("unsupported statement: expected SELECT, got '" + t.text + "'",
                                      t.line, t.col);
    }
    parse_select(-1, /*top_level=*/true);
    if (is_sym(";")) next();
    if (peek().kind != TokKind::End) {
      const Token& t = peek();
      throw ParseError("trailing input after statement: '" + t.text + "'", t.line, t.col);
    }
    resolve_refs();
    return out_;
  }

private:
  const Token& peek(int ahead = 0) const {
    std::size_t idx = pos_ + static_cast<std::size_t>(ahead);
    return idx < toks_.size() ? toks_[idx] : toks_.back();
  }
  const Token& next() { return toks_[pos_++]; }
  bool is_kw(const char* kw, int ahead = 0) const {
    return peek(ahead).kind == TokKind::Keyword && peek(ahead).text == kw;
  }
  bool is_sym(const char* s, int ahead = 0) const {
    return peek(ahead).kind == TokKind::Symbol && peek(ahead).text == s;
  }
  void expect_kw(const char* kw) {
    if (!is_kw(kw)) {
      const Token& t = peek();
      throw ParseError("expected " + std::string(kw) + ", got '" + t.text + "'", t.line, t.col);
    }
    next();
  }
  void expect_sym(const char* s) {
    if (!is_sym(s)) {
      const Token& t = peek();
      throw ParseError("expected '" + std::string(s) + "', got '" + t.text + "'", t.line, t.col);
    }
    next();
  }
  std::string expect_ident(const char* what) {
    if (peek().kind != TokKind::Ident) {
      const Token& t = peek();
      throw ParseError("expected " + std::string(what) + ", got '" + t.text + "'", t.line, t.col);
    }
    return next().text;
  }

  int parse_select(int parent_scope, bool top_level) {
    expect_kw("select");
    int scope = static_cast<int>(scopes_.size());
    scopes_.push_back(Scope{parent_scope, {}, {}});
    if (!top_level) ++out_.subquery_count;

    if (is_kw("distinct")) {
      next();
      out_.has_distinct = true;
    }
    parse_select_item(scope);
    while (is_sym(",")) {
      next();
      parse_select_item(scope);
    }

    if (is_kw("from")) {
      next();
      parse_from_item(scope);
      int from_list = 1;
      while (is_sym(",")) {
        next();
        parse_from_item(scope);
        ++from_list;
      }
      // implicit joins in a multi-table FROM count like explicit ones
      out_.join_count += from_list - 1;
    }
    if (is_kw("where")) {
      next();
      parse_expr(scope, RefContext::Where);
    }
    if (is_kw("group")) {
      next();
      expect_kw("by");
      parse_expr(scope, RefContext::GroupBy);
      int items = 1;
      while (is_sym(",")) {
        next();
        parse_expr(scope, RefContext::GroupBy);
        ++items;
      }
      if (top_level) out_.group_by_count = items;
    }
    if (is_kw("order")) {
      next();
      expect_kw("by");
      parse_order_item(scope, RefContext::OrderBy);
      while (is_sym(",")) {
        next();
        parse_order_item(scope, RefContext::OrderBy);
      }
      if (top_level) out_.has_order_by = true;
    }
    if (is_kw("limit")) {
      next();
      if (peek().kind != TokKind::Number) {
        const Token& t = peek();
        throw ParseError("expected row count after LIMIT, got '" + t.text + "'", t.line, t.col);
      }
      next();
    }
    return scope;
  }

  void parse_select_item(int scope) {
    if (is_sym("*")) {
      next();
      return;
    }
    parse_expr(scope, RefContext::Plain);
    if (is_kw("as")) {
      next();
      expect_ident("output alias");
    } else if (peek().kind == TokKind::Ident) {
      next();  // bare output alias
    }
  }

  void parse_from_item(int scope) {
    parse_table_ref(scope);
    for (;;) {
      int join_kw = 0;
      if (is_kw("join")) {
        join_kw = 1;
      } else if ((is_kw("inner") || is_kw("cross")) && is_kw("join", 1)) {
        join_kw = 2;
      } else if ((is_kw("left") || is_kw("right") || is_kw("full"))) {
        join_kw = is_kw("outer", 1) ? (is_kw("join", 2) ? 3 : 0) : (is_kw("join", 1) ? 2 : 0);
        if (join_kw == 0) {
          const Token& t = peek();
          throw ParseError("expected JOIN after '" + t.text + "'", t.line, t.col);
        }
      } else {
        break;
      }
      for (int k = 0; k < join_kw; ++k) next();
      ++out_.join_count;
      parse_table_ref(scope);
      if (is_kw("on")) {
        next();
        parse_expr(scope, RefContext::Join);
      }
    }
  }

  void parse_table_ref(int scope) {
    const Token& t = peek();
    std::string table = expect_ident("table name");
    std::string alias = table;
    if (is_kw("as")) {
      next();
      alias = expect_ident("table alias");
    } else if (peek().kind == TokKind::Ident) {
      alias = next().text;
    }
    Scope& s = scopes_[static_cast<std::size_t>(scope)];
    if (s.aliases.count(alias))
      throw ParseError("duplicate table alias '" + alias + "'", t.line, t.col);
    s.aliases[alias] = table;
    if (alias != table) s.aliases.emplace(table, table);
    s.tables.push_back(table);
    out_.tables.insert(table);
  }

  void parse_order_item(int scope, RefContext ctx) {
    parse_expr(scope, ctx);
    if (is_kw("asc") || is_kw("desc")) next();
  }

  void parse_expr(int scope, RefContext ctx) {
    parse_and(scope, ctx);
    while (is_kw("or")) {
      next();
      parse_and(scope, ctx);
    }
  }

  void parse_and(int scope, RefContext ctx) {
    parse_not(scope, ctx);
    while (is_kw("and")) {
      next();
      parse_not(scope, ctx);
    }
  }

  void parse_not(int scope, RefContext ctx) {
    if (is_kw("not")) next();
    parse_predicate(scope, ctx);
  }

  void parse_predicate(int scope, RefContext ctx) {
    parse_additive(scope, ctx);
    if (peek().kind == TokKind::Symbol) {
      static const std::set<std::string> cmp = {"=", "<>", "!=", "<", "<=", ">", ">="};
      if (cmp.count(peek().text)) {
        next();
        parse_additive(scope, ctx);
        return;
      }
    }
    if (is_kw("not") && (is_kw("like", 1) || is_kw("in", 1) || is_kw("between", 1))) next();
    if (is_kw("like")) {
      next();
      out_.has_like = true;
      parse_additive(scope, ctx);
    } else if (is_kw("in")) {
      next();
      expect_sym("(");
      if (is_kw("select")) {
        parse_select(scope, false);
      } else {
        parse_expr(scope, ctx);
        while (is_sym(",")) {
          next();
          parse_expr(scope, ctx);
        }
      }
      expect_sym(")");
    } else if (is_kw("between")) {
      next();
      parse_additive(scope, ctx);
      expect_kw("and");
      parse_additive(scope, ctx);
    } else if (is_kw("is")) {
      next();
      if (is_kw("not")) next();
      expect_kw("null");
    }
  }

  void parse_additive(int scope, RefContext ctx) {
    parse_multiplicative(scope, ctx);
    while (is_sym("+") || is_sym("-")) {
      next();
      parse_multiplicative(scope, ctx);
    }
  }

  void parse_multiplicative(int scope, RefContext ctx) {
    parse_unary(scope, ctx);
    while (is_sym("*") || is_sym("/") || is_sym("%")) {
      next();
      parse_unary(scope, ctx);
    }
  }

  void parse_unary(int scope, RefContext ctx) {
    if (is_sym("-") || is_sym("+")) next();
    parse_primary(scope, ctx);
  }

  void parse_primary(int scope, RefContext ctx) {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::Number:
      case TokKind::String:
        next();
        return;
      case TokKind::Keyword:
        if (t.text == "null") {
          next();
          return;
        }
        if (t.text == "exists") {
          next();
          expect_sym("(");
          if (!is_kw("select"))
            throw ParseError("EXISTS requires a subquery", peek().line, peek().col);
          parse_select(scope, false);
          expect_sym(")");
          return;
        }
        throw ParseError("unexpected keyword '" + t.text + "'", t.line, t.col);
      case TokKind::Symbol:
        if (t.text == "(") {
          next();
          if (is_kw("select")) {
            parse_select(scope, false);
          } else {
            parse_expr(scope, ctx);
          }
          expect_sym(")");
          return;
        }
        throw ParseError("unexpected token '" + t.text + "'", t.line, t.col);
      case TokKind::Ident:
        parse_ident_or_call(scope, ctx);
        return;
      case TokKind::End:
        throw ParseError("unexpected end of input", t.line, t.col);
    }
  }

  void parse_ident_or_call(int scope, RefContext ctx) {
    Token head = next();
    if (is_sym("(")) {
      // function call, optionally windowed via OVER (...)
      next();
      if (is_kw("distinct")) {
        next();
        out_.has_distinct = true;
      }
      if (is_sym("*")) {
        next();
      } else if (!is_sym(")")) {
        parse_expr(scope, ctx);
        while (is_sym(",")) {
          next();
          parse_expr(scope, ctx);
        }
      }
      expect_sym(")");
      if (is_kw("over")) {
        next();
        out_.has_window = true;
        expect_sym("(");
        if (is_kw("partition")) {
          next();
          expect_kw("by");
          parse_expr(scope, RefContext::Plain);
          while (is_sym(",")) {
            next();
            parse_expr(scope, RefContext::Plain);
          }
        }
        if (is_kw("order")) {
          next();
          expect_kw("by");
          parse_order_item(scope, RefContext::Plain);
          while (is_sym(",")) {
            next();
            parse_order_item(scope, RefContext::Plain);
          }
        }
        expect_sym(")");
      }
      return;
    }
    if (is_sym(".")) {
      next();
      if (is_sym("*")) {  // qualified star contributes no column refs
        next();
        return;
      }
      std::string col = expect_ident("column name");
      refs_.push_back({head.text, col, scope, ctx, head.line, head.col});
      return;
    }
    refs_.push_back({"", head.text, scope, ctx, head.line, head.col});
  }

  void resolve_refs() {
    for (const auto& ref : refs_) {
      std::string table;
      if (!ref.qualifier.empty()) {
        for (int s = ref.scope; s >= 0; s = scopes_[static_cast<std::size_t>(s)].parent) {
          auto it = scopes_[static_cast<std::size_t>(s)].aliases.find(ref.qualifier);
          if (it != scopes_[static_cast<std::size_t>(s)].aliases.end()) {
            table = it->second;
            break;
          }
        }
        if (table.empty())
          throw ParseError("unknown table or alias '" + ref.qualifier + "'", ref.line, ref.col);
      } else {
        for (int s = ref.scope; s >= 0; s = scopes_[static_cast<std::size_t>(s)].parent) {
          const Scope& sc = scopes_[static_cast<std::size_t>(s)];
          if (sc.tables.empty()) continue;
          if (sc.tables.size() > 1)
            throw ParseError("ambiguous unqualified column '" + ref.name + "'", ref.line, ref.col);
          table = sc.tables.front();
          break;
        }
        if (table.empty())
          throw ParseError("column '" + ref.name + "' referenced with no tables in scope",
                           ref.line, ref.col);
      }
      ColumnRef cr{table, ref.name};
      out_.columns.insert(cr);
      switch (ref.ctx) {
        case RefContext::Where: out_.in_where.insert(cr); break;
        case RefContext::Join: out_.in_join.insert(cr); break;
        case RefContext::OrderBy: out_.in_orderby.insert(cr); break;
        default: break;
      }
    }
  }

  Lexer lex_;
  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
  std::vector<Scope> scopes_;
  std::vector<PendingRef> refs_;
  ParsedQuery out_;
};

}  // namespace sqldetail

/// Parses one statement of the supported SELECT subset.
inline ParsedQuery parse_sql_subset(const std::string& sql_text) {
  return sqldetail::Parser(sql_text).parse();
}

}  // namespace ontotune
