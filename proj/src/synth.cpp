#include "lamner/synth.hpp"

#include <cctype>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "lamner/error.hpp"
#include "lamner/random.hpp"

namespace lamner {
namespace {

const std::vector<std::string> kFields = {
    "name",  "size",    "count",  "value",   "index",    "total",   "path",    "label",
    "title", "owner",   "limit",  "offset",  "status",   "score",   "weight",  "level",
    "timeout", "capacity", "message", "version", "userName", "maxSize", "lastModified", "retryCount",
};
const std::vector<std::string> kNumericFields = {"count", "size", "score", "weight", "level",
                                                 "offset", "limit", "total", "retryCount", "capacity"};
const std::vector<std::string> kTypes = {"String", "int", "long", "boolean", "double", "Integer", "Date"};
const std::vector<std::string> kClasses = {
    "User",    "Item",    "Order",   "Account", "Node",     "Buffer",   "Task",    "Record",
    "Session", "Message", "Request", "Entry",   "Token",    "Document", "Event",   "Handler",
    "Client",  "Channel", "Product", "Invoice",
};
const std::vector<std::string> kCollections = {"items",  "users",    "entries",   "nodes",    "tasks",
                                               "records", "events", "listeners", "children", "values"};
const std::vector<std::string> kMaps = {"cache", "registry", "index", "lookup", "table"};
const std::vector<std::string> kResources = {"stream", "reader", "writer", "channel", "socket", "connection"};
const std::vector<std::string> kLoopVars = {"entry", "candidate", "current", "element"};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string decapitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

// "lastModified" -> "last modified"
std::string words(const std::string& camel) {
  std::string out;
  for (char c : camel) {
    if (std::isupper(static_cast<unsigned char>(c))) {
      out += ' ';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      out += c;
    }
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

struct Slots {
  std::string field, num_field, type, cls, obj, coll, map, res, var;
  int number;
};

using Template = std::function<std::pair<std::string, std::vector<std::string>>(const Slots&)>;

const std::vector<Template>& templates() {
  static const std::vector<Template> all = {
      [](const Slots& s) {
        return std::pair{"returns the " + words(s.field) + ".",
                         std::vector<std::string>{"public " + s.type + " get" + capitalize(s.field) + "() {",
                                                  "    return " + s.field + ";", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"sets the " + words(s.field) + ".",
                         std::vector<std::string>{
                             "public void set" + capitalize(s.field) + "(" + s.type + " " + s.field + ") {",
                             "    this." + s.field + " = " + s.field + ";", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"checks whether the " + words(s.field) + " is set.",
                         std::vector<std::string>{"public boolean has" + capitalize(s.field) + "() {",
                                                  "    return " + s.field + " != null;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"creates a new " + words(decapitalize(s.cls)) + " with the given " + words(s.field) + ".",
                         std::vector<std::string>{
                             "public static " + s.cls + " create" + s.cls + "(String " + s.field + ") {",
                             "    " + s.cls + " " + s.obj + " = new " + s.cls + "(" + s.field + ");",
                             "    " + s.obj + ".init();", "    return " + s.obj + ";", "}"}};
      },
      [](const Slots& s) {
        const std::string arr = s.num_field + "s";
        return std::pair{"returns the sum of all " + words(arr) + ".",
                         std::vector<std::string>{"public int sum" + capitalize(arr) + "(int[] " + arr + ") {",
                                                  "    int total = 0;",
                                                  "    for (int i = 0; i < " + arr + ".length; i++) {",
                                                  "        total += " + arr + "[i];", "    }",
                                                  "    return total;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"checks whether the " + s.coll + " contain the given " + words(decapitalize(s.cls)) + ".",
                         std::vector<std::string>{
                             "public boolean contains" + s.cls + "(" + s.cls + " " + s.obj + ") {",
                             "    for (" + s.cls + " " + s.var + " : " + s.coll + ") {",
                             "        if (" + s.var + ".equals(" + s.obj + ")) {", "            return true;",
                             "        }", "    }", "    return false;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"adds a " + words(decapitalize(s.cls)) + " to the " + s.coll + ".",
                         std::vector<std::string>{
                             "public void add" + s.cls + "(" + s.cls + " " + s.obj + ") {",
                             "    if (" + s.obj + " == null) {",
                             "        throw new IllegalArgumentException(\"" + s.obj + " must not be null\");",
                             "    }", "    " + s.coll + ".add(" + s.obj + ");", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"removes the given " + words(decapitalize(s.cls)) + " from the " + s.coll + ".",
                         std::vector<std::string>{
                             "public boolean remove" + s.cls + "(" + s.cls + " " + s.obj + ") {",
                             "    return " + s.coll + ".remove(" + s.obj + ");", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"closes the underlying " + s.res + ".",
                         std::vector<std::string>{"public void close() throws IOException {",
                                                  "    if (" + s.res + " != null) {",
                                                  "        " + s.res + ".close();",
                                                  "        " + s.res + " = null;", "    }", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"returns a string representation of this " + words(decapitalize(s.cls)) + ".",
                         std::vector<std::string>{
                             "@Override", "public String toString() {",
                             "    return \"" + s.cls + "[" + s.field + "=\" + " + s.field + " + \"]\";", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"counts the number of " + s.coll + ".",
                         std::vector<std::string>{
                             "public int count" + capitalize(s.coll) + "() {", "    int count = 0;",
                             "    Iterator<" + s.cls + "> it = " + s.coll + ".iterator();",
                             "    while (it.hasNext()) {", "        it.next();", "        count++;", "    }",
                             "    return count;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"finds the " + words(decapitalize(s.cls)) + " for the given key.",
                         std::vector<std::string>{
                             "public " + s.cls + " find" + s.cls + "(String key) {",
                             "    " + s.cls + " result = " + s.map + ".get(key);", "    if (result == null) {",
                             "        log.warn(\"missing " + s.obj + " \" + key);", "    }", "    return result;",
                             "}"}};
      },
      [](const Slots& s) {
        return std::pair{"returns the larger of two " + words(s.num_field) + " values.",
                         std::vector<std::string>{
                             "public static int max" + capitalize(s.num_field) + "(int a, int b) {",
                             "    return a > b ? a : b;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"removes all " + s.coll + " and resets the " + words(s.num_field) + ".",
                         std::vector<std::string>{"public synchronized void clear" + capitalize(s.coll) + "() {",
                                                  "    " + s.coll + ".clear();", "    " + s.num_field + " = 0;",
                                                  "}"}};
      },
      [](const Slots& s) {
        return std::pair{"checks if there are no " + s.coll + ".",
                         std::vector<std::string>{"public boolean is" + capitalize(s.coll) + "Empty() {",
                                                  "    return " + s.coll + ".size() == 0;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"increases the " + words(s.num_field) + " by the given amount.",
                         std::vector<std::string>{
                             "public void increment" + capitalize(s.num_field) + "(int delta) {",
                             "    " + s.num_field + " += delta;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"copies the " + s.coll + " into a new array.",
                         std::vector<std::string>{
                             "public " + s.cls + "[] to" + s.cls + "Array() {",
                             "    " + s.cls + "[] result = new " + s.cls + "[" + s.coll + ".size()];",
                             "    for (int i = 0; i < result.length; i++) {",
                             "        result[i] = " + s.coll + ".get(i);", "    }", "    return result;", "}"}};
      },
      [](const Slots& s) {
        return std::pair{"compares the " + words(s.num_field) + " with another " + words(decapitalize(s.cls)) + ".",
                         std::vector<std::string>{
                             "public boolean same" + capitalize(s.num_field) + "(" + s.cls + " other) {",
                             "    return other != null && this." + s.num_field + " == other." + s.num_field + ";",
                             "}"}};
      },
      [](const Slots& s) {
        return std::pair{"sets the maximum " + words(s.num_field) + ".",
                         std::vector<std::string>{
                             "public void setMax" + capitalize(s.num_field) + "(int limit) {",
                             "    if (limit < 0 || limit > " + std::to_string(s.number) + ") {",
                             "        throw new IllegalArgumentException(\"invalid limit\");", "    }",
                             "    this." + s.num_field + " = limit;", "}"}};
      },
  };
  return all;
}

}  // namespace

std::vector<SynthMethod> synthesize_methods(std::size_t count, std::uint64_t seed, const std::string& id_prefix) {
  Rng rng(seed);
  std::vector<SynthMethod> out;
  out.reserve(count);
  const auto& all = templates();
  for (std::size_t n = 0; n < count; ++n) {
    Slots s;
    s.field = rng.pick(kFields);
    s.num_field = rng.pick(kNumericFields);
    s.type = rng.pick(kTypes);
    s.cls = rng.pick(kClasses);
    s.obj = decapitalize(s.cls);
    s.coll = rng.pick(kCollections);
    s.map = rng.pick(kMaps);
    s.res = rng.pick(kResources);
    s.var = rng.pick(kLoopVars);
    s.number = static_cast<int>(10 + rng.index(990));
    auto [comment, lines] = all[rng.index(all.size())](s);
    out.push_back({id_prefix + std::to_string(n), join_lines(lines), comment});
  }
  return out;
}

void write_synth_jsonl(const std::filesystem::path& path, const std::vector<SynthMethod>& methods) {
  std::string text;
  for (const auto& m : methods) {
    text += nlohmann::json{{"id", m.id}, {"code", m.code}, {"comment", m.comment}}.dump();
    text += '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

}  // namespace lamner
