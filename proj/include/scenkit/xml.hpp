#pragma once

/**
 * Minimal XML element-tree reader/writer.
 *
 * Covers the subset the road-network and scenario file formats need:
 * declaration, comments, nested elements, attributes, character data and
 * the five predefined entities plus numeric references. No namespaces,
 * no CDATA, no DTD processing (a DOCTYPE line is skipped).
 *
 * The writer is deterministic: attributes keep insertion order, children
 * keep document order, indentation is two spaces.
 */

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scenkit::xml {

class XmlError : public std::runtime_error {
 public:
  XmlError(const std::string& msg, int line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;  // character data directly inside this element, trimmed
  int line = 0;      // 1-based source line of the opening tag

  Element() = default;
  explicit Element(std::string element_name) : name(std::move(element_name)) {}

  Element& set(std::string_view key, std::string value);
  Element& add_child(Element child);

  const std::string* attr(std::string_view key) const;
  std::string attr_or(std::string_view key, std::string fallback) const;
  /// Throws XmlError when the attribute is missing.
  const std::string& attr_required(std::string_view key) const;
  double attr_double(std::string_view key) const;

  const Element* child(std::string_view child_name) const;
  std::vector<const Element*> children_named(std::string_view child_name) const;
  std::size_t count_children(std::string_view child_name) const;
};

/// Parses a complete document and returns its root element.
Element parse(std::string_view input);

/// Serializes with an XML declaration and trailing newline.
std::string write_document(const Element& root);

std::string escape_text(std::string_view s);

}  // namespace scenkit::xml
