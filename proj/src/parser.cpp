#include "ndtt/parser.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace ndtt {

namespace {

enum class Tok {
  End,
  LowerIdent,
  UpperIdent,
  Int,
  Deduce,      // :-
  Highway,     // :--
  Update,      // <-
  Colon,       // :
  DoubleColon, // ::
  Comma,
  LParen,
  RParen,
  Dot,
  Bang,
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

class Lexer {
public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    skip_ws();
    SourcePos pos{line_, col_};
    if (i_ >= src_.size()) return {Tok::End, "", pos};
    char c = src_[i_];
    if (c == '%') {
      while (i_ < src_.size() && src_[i_] != '\n') advance();
      return next();
    }
    if (c == '*')
      throw Error(ErrorKind::UnsupportedExtension,
                  "anonymous entity creation via `*` is not supported", pos);
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string t;
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        t += src_[i_];
        advance();
      }
      return {Tok::Int, t, pos};
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string t;
      while (i_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
        t += src_[i_];
        advance();
      }
      bool upper = std::isupper(static_cast<unsigned char>(t[0]));
      return {upper ? Tok::UpperIdent : Tok::LowerIdent, t, pos};
    }
    switch (c) {
      case ':':
        advance();
        if (peek() == '-') {
          advance();
          if (peek() == '-') {
            advance();
            return {Tok::Highway, ":--", pos};
          }
          return {Tok::Deduce, ":-", pos};
        }
        if (peek() == ':') {
          advance();
          return {Tok::DoubleColon, "::", pos};
        }
        return {Tok::Colon, ":", pos};
      case '<':
        advance();
        if (peek() == '-') {
          advance();
          return {Tok::Update, "<-", pos};
        }
        throw Error(ErrorKind::Syntax, "stray '<'", pos);
      case ',': advance(); return {Tok::Comma, ",", pos};
      case '(': advance(); return {Tok::LParen, "(", pos};
      case ')': advance(); return {Tok::RParen, ")", pos};
      case '.': advance(); return {Tok::Dot, ".", pos};
      case '!': advance(); return {Tok::Bang, "!", pos};
      default:
        throw Error(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", pos);
    }
  }

private:
  char peek() const { return i_ < src_.size() ? src_[i_] : '\0'; }
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }
  void skip_ws() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) advance();
  }

  const std::string& src_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
public:
  explicit Parser(const std::string& src) : lex_(src) { shift(); }

  Ast parse() {
    Ast ast;
    while (cur_.kind != Tok::End) {
      if (cur_.kind == Tok::Deduce) {
        SourcePos pos = cur_.pos;
        shift();
        ast.decls.push_back(declaration(pos));
      } else {
        ast.rules.push_back(rule());
      }
    }
    return ast;
  }

private:
  void shift() { cur_ = lex_.next(); }

  void expect(Tok k, const char* what) {
    if (cur_.kind != k)
      throw Error(ErrorKind::Syntax,
                  std::string("expected ") + what + ", found '" + describe(cur_) + "'", cur_.pos);
    shift();
  }

  static std::string describe(const Token& t) {
    return t.kind == Tok::End ? "end of input" : t.text;
  }

  Declaration declaration(SourcePos pos) {
    if (cur_.kind != Tok::LowerIdent || (cur_.text != "embed" && cur_.text != "event"))
      throw Error(ErrorKind::Syntax, "expected embed(...) or event(...) after ':-'", cur_.pos);
    Declaration d;
    d.pos = pos;
    d.kind = cur_.text == "embed" ? Declaration::Kind::Embed : Declaration::Kind::Event;
    shift();
    expect(Tok::LParen, "'('");
    if (cur_.kind != Tok::LowerIdent)
      throw Error(ErrorKind::Syntax, "expected functor name", cur_.pos);
    d.functor = cur_.text;
    shift();
    expect(Tok::Comma, "','");
    if (cur_.kind != Tok::Int)
      throw Error(ErrorKind::Syntax, "expected nonnegative dimension", cur_.pos);
    d.dim = std::stoi(cur_.text);
    shift();
    expect(Tok::RParen, "')'");
    if (cur_.kind == Tok::Colon) {
      if (d.kind != Declaration::Kind::Event)
        throw Error(ErrorKind::BadAnnotation, "only event declarations take a tau name", cur_.pos);
      shift();
      d.tau = param_name();
    }
    expect(Tok::Dot, "'.'");
    return d;
  }

  Atom atom() {
    if (cur_.kind != Tok::LowerIdent)
      throw Error(ErrorKind::Syntax, "expected an atom", cur_.pos);
    if (cur_.text == "embed" || cur_.text == "event")
      throw Error(ErrorKind::Syntax,
                  "'" + cur_.text + "' is reserved for declarations (did you mean ':- " +
                      cur_.text + "(...).'?)",
                  cur_.pos);
    Atom a;
    a.functor = cur_.text;
    shift();
    if (cur_.kind == Tok::LParen) {
      shift();
      a.args.push_back(term());
      while (cur_.kind == Tok::Comma) {
        shift();
        a.args.push_back(term());
      }
      expect(Tok::RParen, "')'");
    }
    return a;
  }

  Term term() {
    Token t = cur_;
    switch (t.kind) {
      case Tok::LowerIdent:
      case Tok::Int: shift(); return Term::constant(t.text);
      case Tok::UpperIdent: shift(); return Term::variable(t.text);
      default:
        throw Error(ErrorKind::Syntax, "expected a constant or variable", t.pos);
    }
  }

  Atom param_name() {
    if (cur_.kind == Tok::Int) {
      if (cur_.text != "0")
        throw Error(ErrorKind::BadAnnotation,
                    "only the zero matrix may be named by an integer", cur_.pos);
      shift();
      return Atom{"0", {}};
    }
    return atom_allow_reserved();
  }

  // parameter names live in their own namespace, so params(...) etc. are fine
  Atom atom_allow_reserved() {
    if (cur_.kind != Tok::LowerIdent)
      throw Error(ErrorKind::Syntax, "expected a parameter name", cur_.pos);
    Atom a;
    a.functor = cur_.text;
    shift();
    if (cur_.kind == Tok::LParen) {
      shift();
      a.args.push_back(term());
      while (cur_.kind == Tok::Comma) {
        shift();
        a.args.push_back(term());
      }
      expect(Tok::RParen, "')'");
    }
    return a;
  }

  Rule rule() {
    Rule r;
    r.pos = cur_.pos;
    bool head_negated = false;
    if (cur_.kind == Tok::Bang) {
      head_negated = true;
      shift();
    }
    r.head = atom();
    if (cur_.kind == Tok::Colon) {
      shift();
      r.beta = param_name();
    }
    switch (cur_.kind) {
      case Tok::Dot:
        if (head_negated)
          throw Error(ErrorKind::Syntax, "'!' head requires a '<-' rule", r.pos);
        shift();
        r.kind = RuleKind::Deductive;
        return r;
      case Tok::DoubleColon:
        if (head_negated)
          throw Error(ErrorKind::Syntax, "'!' head requires a '<-' rule", r.pos);
        shift();
        r.full = param_name();
        expect(Tok::Dot, "'.'");
        r.kind = RuleKind::Deductive;
        return r;
      case Tok::Deduce: r.kind = RuleKind::Deductive; break;
      case Tok::Highway: r.kind = RuleKind::Highway; break;
      case Tok::Update: r.kind = head_negated ? RuleKind::UpdateRemove : RuleKind::UpdateAdd; break;
      default:
        throw Error(ErrorKind::Syntax, "expected ':-', ':--', '<-', '::' or '.'", cur_.pos);
    }
    if (head_negated && r.kind != RuleKind::UpdateRemove)
      throw Error(ErrorKind::Syntax, "'!' head is only allowed on '<-' rules", r.pos);
    shift();
    // optional bias annotation right after the connector; the comma after it
    // is optional (mirrors both spellings used in practice)
    if (cur_.kind == Tok::Colon) {
      shift();
      r.bias = param_name();
      if (cur_.kind == Tok::Comma) shift();
    }
    r.body.push_back(body_elem());
    while (cur_.kind == Tok::Comma) {
      shift();
      r.body.push_back(body_elem());
    }
    if (cur_.kind == Tok::DoubleColon) {
      shift();
      r.full = param_name();
    }
    if (cur_.kind != Tok::Dot)
      throw Error(ErrorKind::Syntax, "unterminated rule: expected '.'", cur_.pos);
    shift();
    return r;
  }

  BodyElem body_elem() {
    BodyElem e;
    if (cur_.kind == Tok::Bang) {
      e.negated = true;
      shift();
    }
    e.atom = atom();
    if (cur_.kind == Tok::Colon) {
      shift();
      e.param = param_name();
    }
    return e;
  }

  Lexer lex_;
  Token cur_{Tok::End, "", {}};
};

}  // namespace

Ast parse_program(const std::string& text) { return Parser(text).parse(); }

Ast parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DataMismatch, "cannot open program file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

}  // namespace ndtt
