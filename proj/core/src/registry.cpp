// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/registry.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json_io.hpp"
#include "toolvoc/error.hpp"

namespace toolvoc {

namespace fs = std::filesystem;
using detail::json;

namespace {

std::vector<ToolParam> parse_params(const json& value, const char* key,
                                    const std::string& where) {
  std::vector<ToolParam> out;
  if (value.is_null()) return out;
  if (!value.is_array())
    throw ParseError(where, std::string("field '") + key + "' must be an array");
  for (const json& p : value) {
    if (p.is_string()) {  // shorthand: a bare name
      out.push_back({p.get<std::string>(), "", ""});
      continue;
    }
    if (!p.is_object())
      throw ParseError(where, std::string("entries of '") + key +
                                  "' must be objects or strings");
    ToolParam param;
    param.name = detail::require_string(p, "name", where);
    param.type = detail::optional_string(p, "type", where);
    param.description = detail::optional_string(p, "description", where);
    out.push_back(std::move(param));
  }
  return out;
}

ToolDocument parse_document(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where, "tool document must be an object");
  ToolDocument doc;
  doc.tool_name = detail::require_string(obj, "tool_name", where);
  doc.api_name = detail::require_string(obj, "api_name", where);
  if (doc.tool_name.empty()) throw ParseError(where, "tool_name is empty");
  if (doc.api_name.empty()) throw ParseError(where, "api_name is empty");
  doc.description = detail::optional_string(obj, "api_description", where);
  doc.method = detail::optional_string(obj, "method", where);
  if (auto it = obj.find("required_parameters"); it != obj.end())
    doc.required_parameters = parse_params(*it, "required_parameters", where);
  if (auto it = obj.find("optional_parameters"); it != obj.end())
    doc.optional_parameters = parse_params(*it, "optional_parameters", where);
  return doc;
}

void append_from_json_value(const json& doc, const std::string& where,
                            std::vector<ToolDocument>* out) {
  if (doc.is_array()) {
    size_t i = 0;
    for (const json& el : doc)
      out->push_back(parse_document(el, where + "[" + std::to_string(i++) + "]"));
  } else {
    out->push_back(parse_document(doc, where));
  }
}

void load_json_file(const fs::path& path, std::vector<ToolDocument>* out) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  append_from_json_value(detail::parse_json(buf.str(), path.string()),
                         path.string(), out);
}

void load_jsonl_file(const fs::path& path, std::vector<ToolDocument>* out) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path.string() + ":" + std::to_string(lineno);
    out->push_back(parse_document(detail::parse_json(line, where), where));
  }
}

}  // namespace

ToolRegistry ToolRegistry::from_documents(std::vector<ToolDocument> docs) {
  if (docs.empty()) throw InvalidArgument("empty registry");
  ToolRegistry reg;
  std::set<std::pair<std::string, std::string>> seen;
  for (ToolDocument& doc : docs) {
    if (!seen.emplace(doc.tool_name, doc.api_name).second) {
      ++reg.duplicates_;  // first occurrence wins
      continue;
    }
    reg.docs_.push_back(std::move(doc));
  }
  std::sort(reg.docs_.begin(), reg.docs_.end(),
            [](const ToolDocument& a, const ToolDocument& b) {
              if (a.tool_name != b.tool_name) return a.tool_name < b.tool_name;
              return a.api_name < b.api_name;
            });
  return reg;
}

const ToolDocument& ToolRegistry::at(ToolId id) const {
  if (id.ordinal >= docs_.size())
    throw InvalidArgument("tool ordinal out of range: " +
                          std::to_string(id.ordinal));
  return docs_[id.ordinal];
}

std::optional<ToolId> ToolRegistry::find(const std::string& tool_name,
                                         const std::string& api_name) const {
  // Canonical order makes the registry binary-searchable by name pair.
  auto it = std::lower_bound(
      docs_.begin(), docs_.end(), std::make_pair(tool_name, api_name),
      [](const ToolDocument& d, const std::pair<std::string, std::string>& k) {
        if (d.tool_name != k.first) return d.tool_name < k.first;
        return d.api_name < k.second;
      });
  if (it == docs_.end() || it->tool_name != tool_name ||
      it->api_name != api_name)
    return std::nullopt;
  return ToolId{static_cast<uint32_t>(it - docs_.begin())};
}

std::string ToolRegistry::doc_text(ToolId id) const {
  const ToolDocument& d = at(id);
  auto names = [](const std::vector<ToolParam>& params) {
    if (params.empty()) return std::string("(none)");
    std::string out;
    for (size_t i = 0; i < params.size(); ++i) {
      if (i) out += ", ";
      out += params[i].name;
    }
    return out;
  };
  std::string text;
  text += "Tool: " + d.tool_name + ". ";
  text += "API: " + d.api_name + ". ";
  text += "Description: " + (d.description.empty() ? "(none)" : d.description) + ". ";
  text += "Method: " + (d.method.empty() ? "(none)" : d.method) + ". ";
  text += "Required parameters: " + names(d.required_parameters) + ". ";
  text += "Optional parameters: " + names(d.optional_parameters) + ".";
  return text;
}

ToolDocument parse_tool_document_json(const std::string& json_text,
                                      const std::string& where) {
  return parse_document(detail::parse_json(json_text, where), where);
}

ToolRegistry load_registry(const std::string& path) {
  fs::path p(path);
  std::vector<ToolDocument> docs;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p)) {
      if (!entry.is_regular_file()) continue;
      fs::path ext = entry.path().extension();
      if (ext == ".json" || ext == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());  // filename order, deterministic
    for (const fs::path& f : files) {
      if (f.extension() == ".jsonl") load_jsonl_file(f, &docs);
      else load_json_file(f, &docs);
    }
  } else if (fs::is_regular_file(p)) {
    if (p.extension() == ".jsonl") load_jsonl_file(p, &docs);
    else load_json_file(p, &docs);
  } else {
    throw ParseError(path, "no such file or directory");
  }
  if (docs.empty()) throw InvalidArgument("empty registry: " + path);
  return ToolRegistry::from_documents(std::move(docs));
}

void save_registry(std::ostream& out, const ToolRegistry& registry) {
  for (const ToolDocument& d : registry.documents()) {
    json doc;
    doc["tool_name"] = d.tool_name;
    doc["api_name"] = d.api_name;
    if (!d.description.empty()) doc["api_description"] = d.description;
    if (!d.method.empty()) doc["method"] = d.method;
    auto params = [](const std::vector<ToolParam>& list) {
      json arr = json::array();
      for (const ToolParam& p : list)
        arr.push_back({{"name", p.name},
                       {"type", p.type},
                       {"description", p.description}});
      return arr;
    };
    if (!d.required_parameters.empty())
      doc["required_parameters"] = params(d.required_parameters);
    if (!d.optional_parameters.empty())
      doc["optional_parameters"] = params(d.optional_parameters);
    out << doc.dump() << "\n";
  }
}

}  // namespace toolvoc
