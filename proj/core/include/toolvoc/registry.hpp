// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace toolvoc {

// Index of a tool document in canonical registry order. Canonical order is
// (tool_name, api_name) ascending by byte comparison, so ordinals are stable
// for a given document set no matter how the inputs were split across files.
struct ToolId {
  uint32_t ordinal = 0;

  friend bool operator==(ToolId a, ToolId b) { return a.ordinal == b.ordinal; }
  friend bool operator!=(ToolId a, ToolId b) { return !(a == b); }
  friend bool operator<(ToolId a, ToolId b) { return a.ordinal < b.ordinal; }
};

struct ToolParam {
  std::string name;
  std::string type;         // free-form ("STRING", "NUMBER", ...), may be empty
  std::string description;  // may be empty
};

// One (tool, api) pair as ingested. tool_name and api_name are the raw
// strings from the source data, untouched; normalization happens downstream.
struct ToolDocument {
  std::string tool_name;
  std::string api_name;
  std::string description;
  std::string method;  // HTTP verb, may be empty
  std::vector<ToolParam> required_parameters;
  std::vector<ToolParam> optional_parameters;
};

class ToolRegistry {
 public:
  // Deduplicates on (tool_name, api_name) keeping the first occurrence, then
  // sorts canonically. Throws InvalidArgument on an empty document set.
  static ToolRegistry from_documents(std::vector<ToolDocument> docs);

  size_t size() const { return docs_.size(); }
  const ToolDocument& at(ToolId id) const;
  const std::vector<ToolDocument>& documents() const { return docs_; }

  std::optional<ToolId> find(const std::string& tool_name,
                             const std::string& api_name) const;

  // Flat-text rendering of one document, used as the retrieval corpus and as
  // the tool-feedback turn in agent conversations.
  std::string doc_text(ToolId id) const;

  // How many input documents were dropped as duplicates during ingestion.
  size_t duplicate_count() const { return duplicates_; }

 private:
  std::vector<ToolDocument> docs_;
  size_t duplicates_ = 0;
};

// Loads tool documents from `path`:
//  - a .json file holding either one document object or an array of them,
//  - a .jsonl file with one document object per line,
//  - a directory, scanned non-recursively for the above in filename order.
// Throws ParseError on malformed input, InvalidArgument if nothing was found.
ToolRegistry load_registry(const std::string& path);

// Writes the registry as JSONL, one document per line in ordinal order, in
// the same shape load_registry reads. Ingest-then-save is a fixed point.
void save_registry(std::ostream& out, const ToolRegistry& registry);

// Parses one document object from already-decoded JSON text. Exposed for
// tests and for embedding registries inside other payloads.
ToolDocument parse_tool_document_json(const std::string& json_text,
                                      const std::string& where);

}  // namespace toolvoc
