#include "routh/system_file.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "routh/reduction.hpp"

namespace routh {

namespace {

// Minimal single-line TOML subset: [table] headers, key = value with string,
// number, array, and inline-table values, '#' comments.
struct TomlValue {
  enum class Type { String, Number, StringArray, NumberArray, Table };
  Type type = Type::Number;
  std::string string_value;
  double number_value = 0.0;
  std::vector<std::string> string_array;
  std::vector<double> number_array;
  std::vector<std::pair<std::string, double>> table;  // inline, numeric values
};

struct LineParser {
  const std::string& text;
  std::size_t pos = 0;
  std::size_t line_no;

  LineParser(const std::string& t, std::size_t line) : text(t), line_no(line) {}

  [[noreturn]] void fail(const std::string& what) {
    throw DefinitionError(what, line_no);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }

  std::string bare_key() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '_' || text[pos] == '-'))
      ++pos;
    if (pos == start) fail("expected a key");
    return text.substr(start, pos - start);
  }

  std::string string_literal() {
    expect('"');
    std::string out;
    while (pos < text.size() && text[pos] != '"') {
      if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
      out += text[pos++];
    }
    if (pos >= text.size()) fail("unterminated string");
    ++pos;
    return out;
  }

  double number_literal() {
    skip_ws();
    std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
    bool digits = false;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '.' || text[pos] == 'e' || text[pos] == 'E' ||
            ((text[pos] == '+' || text[pos] == '-') &&
             (text[pos - 1] == 'e' || text[pos - 1] == 'E')))) {
      digits = digits || std::isdigit(static_cast<unsigned char>(text[pos]));
      ++pos;
    }
    if (!digits) fail("expected a number");
    return std::strtod(text.substr(start, pos - start).c_str(), nullptr);
  }

  TomlValue value() {
    TomlValue v;
    char c = peek();
    if (c == '"') {
      v.type = TomlValue::Type::String;
      v.string_value = string_literal();
      return v;
    }
    if (c == '[') {
      ++pos;
      if (peek() == ']') {
        ++pos;
        v.type = TomlValue::Type::NumberArray;
        return v;
      }
      bool strings = peek() == '"';
      v.type = strings ? TomlValue::Type::StringArray : TomlValue::Type::NumberArray;
      for (;;) {
        if (strings)
          v.string_array.push_back(string_literal());
        else
          v.number_array.push_back(number_literal());
        if (peek() == ',') {
          ++pos;
          continue;
        }
        expect(']');
        return v;
      }
    }
    if (c == '{') {
      ++pos;
      v.type = TomlValue::Type::Table;
      if (peek() == '}') {
        ++pos;
        return v;
      }
      for (;;) {
        std::string k = bare_key();
        expect('=');
        v.table.emplace_back(k, number_literal());
        if (peek() == ',') {
          ++pos;
          continue;
        }
        expect('}');
        return v;
      }
    }
    v.type = TomlValue::Type::Number;
    v.number_value = number_literal();
    return v;
  }
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

void validate(const SystemFile& file) {
  if (file.coordinates.empty())
    throw DefinitionError("[system] coordinates must be a non-empty array");
  std::set<std::string> names(file.coordinates.begin(), file.coordinates.end());
  if (names.size() != file.coordinates.size())
    throw DefinitionError("coordinates contain a duplicate name");
  for (const auto& c : file.coordinates) {
    if (c == kAlphaName)
      throw DefinitionError("coordinate name 'alpha' is reserved");
    for (const auto& other : file.coordinates) {
      if (velocity_name(other) == c || momentum_name(other) == c ||
          acceleration_name(other) == c)
        throw DefinitionError("coordinate '" + c +
                              "' collides with a derived name of '" + other + "'");
    }
    if (file.params.count(c) || file.params.count(velocity_name(c)))
      throw DefinitionError("parameter shadows coordinate '" + c + "'");
  }
  if (file.params.count(kAlphaName))
    throw DefinitionError("parameter name 'alpha' is reserved");
  if (file.cyclic && !names.count(*file.cyclic))
    throw DefinitionError("cyclic coordinate '" + *file.cyclic +
                          "' is not in coordinates");
  if (file.lagrangian_text.empty())
    throw DefinitionError("[system] lagrangian is required");

  Expr lagrangian;
  try {
    lagrangian = parse(file.lagrangian_text);
  } catch (const ParseError& err) {
    throw DefinitionError(std::string("lagrangian does not parse: ") + err.what() +
                          " (byte offset " + std::to_string(err.offset()) + ")");
  }
  std::set<std::string> allowed = names;
  for (const auto& c : file.coordinates) allowed.insert(velocity_name(c));
  for (const auto& [k, _] : file.params) allowed.insert(k);
  for (const auto& v : free_variables(lagrangian))
    if (!allowed.count(v))
      throw DefinitionError("lagrangian references unknown name '" + v + "'");

  if (file.simulate) {
    const auto& sim = *file.simulate;
    if (!(sim.dt > 0)) throw DefinitionError("[simulate] dt must be positive");
    if (!(sim.t1 > sim.t0)) throw DefinitionError("[simulate] t1 must exceed t0");
    std::set<std::string> state = names;
    for (const auto& c : file.coordinates) state.insert(velocity_name(c));
    for (const auto& [k, _] : sim.initial)
      if (!state.count(k))
        throw DefinitionError("[simulate] initial binds unknown name '" + k + "'");
    for (const auto& s : state)
      if (!sim.initial.count(s))
        throw DefinitionError("[simulate] initial is missing '" + s + "'");
  }
  if (file.reduce && file.reduce->branch && file.reduce->branch != "+" &&
      file.reduce->branch != "-")
    throw DefinitionError("[reduce] branch must be \"+\" or \"-\"");
  if (file.reduce && file.reduce->gauge) {
    try {
      parse(*file.reduce->gauge);
    } catch (const ParseError& err) {
      throw DefinitionError(std::string("gauge does not parse: ") + err.what());
    }
  }
}

}  // namespace

LagrangianSystem SystemFile::system() const {
  return LagrangianSystem(chart(), parse(lagrangian_text), params);
}

Chart SystemFile::chart() const { return Chart(coordinates, cyclic); }

SystemFile parse_system_file(const std::string& contents, const std::string& origin) {
  SystemFile file;
  std::string table;
  std::istringstream in(contents);
  std::string raw;
  std::size_t line_no = 0;
  bool saw_system = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip_comment(raw);
    LineParser p(line, line_no);
    if (p.at_end()) continue;

    if (p.peek() == '[') {
      ++p.pos;
      table = p.bare_key();
      p.expect(']');
      if (!p.at_end()) p.fail("unexpected trailing text after table header");
      if (table != "system" && table != "params" && table != "simulate" &&
          table != "reduce")
        p.fail("unknown table [" + table + "]");
      if (table == "system") saw_system = true;
      if (table == "simulate" && !file.simulate) file.simulate.emplace();
      if (table == "reduce" && !file.reduce) file.reduce.emplace();
      continue;
    }

    std::string key = p.bare_key();
    p.expect('=');
    TomlValue v = p.value();
    if (!p.at_end()) p.fail("unexpected trailing text");

    if (table == "system") {
      if (key == "coordinates") {
        if (v.type != TomlValue::Type::StringArray)
          p.fail("coordinates must be an array of strings");
        file.coordinates = v.string_array;
      } else if (key == "cyclic") {
        if (v.type != TomlValue::Type::String) p.fail("cyclic must be a string");
        file.cyclic = v.string_value;
      } else if (key == "lagrangian") {
        if (v.type != TomlValue::Type::String)
          p.fail("lagrangian must be a string");
        file.lagrangian_text = v.string_value;
      } else {
        p.fail("unknown key '" + key + "' in [system]");
      }
    } else if (table == "params") {
      if (v.type != TomlValue::Type::Number)
        p.fail("parameter '" + key + "' must be a number");
      file.params[key] = v.number_value;
    } else if (table == "simulate") {
      auto& sim = *file.simulate;
      if (key == "initial") {
        if (v.type != TomlValue::Type::Table)
          p.fail("initial must be an inline table");
        for (const auto& [k, val] : v.table) sim.initial[k] = val;
      } else if (key == "t0") {
        sim.t0 = v.number_value;
      } else if (key == "t1") {
        sim.t1 = v.number_value;
      } else if (key == "dt") {
        sim.dt = v.number_value;
      } else {
        p.fail("unknown key '" + key + "' in [simulate]");
      }
    } else if (table == "reduce") {
      auto& red = *file.reduce;
      if (key == "alpha") {
        red.alpha = v.number_value;
      } else if (key == "branch") {
        if (v.type != TomlValue::Type::String) p.fail("branch must be a string");
        red.branch = v.string_value;
      } else if (key == "gauge") {
        if (v.type != TomlValue::Type::String) p.fail("gauge must be a string");
        red.gauge = v.string_value;
      } else if (key == "bracket") {
        if (v.type != TomlValue::Type::NumberArray || v.number_array.size() != 2)
          p.fail("bracket must be an array of two numbers");
        red.bracket = {v.number_array[0], v.number_array[1]};
      } else {
        p.fail("unknown key '" + key + "' in [reduce]");
      }
    } else {
      p.fail("key outside of any table");
    }
  }

  if (!saw_system) throw DefinitionError(origin + ": missing [system] table");
  validate(file);
  return file;
}

SystemFile load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DefinitionError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_system_file(ss.str(), path);
}

}  // namespace routh
