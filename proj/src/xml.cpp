#include "scenkit/xml.hpp"

#include <cctype>
#include <cstdlib>

#include "scenkit/util.hpp"

namespace scenkit::xml {

Element& Element::set(std::string_view key, std::string value) {
  for (auto& [k, v] : attributes) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  attributes.emplace_back(std::string(key), std::move(value));
  return *this;
}

Element& Element::add_child(Element child) {
  children.push_back(std::move(child));
  return children.back();
}

const std::string* Element::attr(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string Element::attr_or(std::string_view key, std::string fallback) const {
  const std::string* v = attr(key);
  return v ? *v : std::move(fallback);
}

const std::string& Element::attr_required(std::string_view key) const {
  const std::string* v = attr(key);
  if (!v) {
    throw XmlError("element <" + name + "> missing attribute '" +
                       std::string(key) + "'",
                   line);
  }
  return *v;
}

double Element::attr_double(std::string_view key) const {
  const std::string& raw = attr_required(key);
  char* end = nullptr;
  double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0') {
    throw XmlError("element <" + name + "> attribute '" + std::string(key) +
                       "' is not a number: '" + raw + "'",
                   line);
  }
  return v;
}

const Element* Element::child(std::string_view child_name) const {
  for (const auto& c : children) {
    if (c.name == child_name) return &c;
  }
  return nullptr;
}

std::vector<const Element*> Element::children_named(
    std::string_view child_name) const {
  std::vector<const Element*> out;
  for (const auto& c : children) {
    if (c.name == child_name) out.push_back(&c);
  }
  return out;
}

std::size_t Element::count_children(std::string_view child_name) const {
  std::size_t n = 0;
  for (const auto& c : children) {
    if (c.name == child_name) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view input) : in_(input) {}

  Element parse_document() {
    skip_bom();
    skip_misc();
    if (eof()) throw XmlError("document has no root element", line_);
    Element root = parse_element();
    skip_misc();
    if (!eof()) throw XmlError("content after root element", line_);
    return root;
  }

 private:
  bool eof() const { return pos_ >= in_.size(); }
  char peek() const { return in_[pos_]; }
  char peek_at(std::size_t off) const {
    return pos_ + off < in_.size() ? in_[pos_ + off] : '\0';
  }

  char advance() {
    char c = in_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void expect(char c) {
    if (eof() || peek() != c) {
      throw XmlError(std::string("expected '") + c + "'", line_);
    }
    advance();
  }

  void skip_bom() {
    if (in_.size() >= 3 && static_cast<unsigned char>(in_[0]) == 0xEF &&
        static_cast<unsigned char>(in_[1]) == 0xBB &&
        static_cast<unsigned char>(in_[2]) == 0xBF) {
      pos_ = 3;
    }
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  // Whitespace, declarations, processing instructions, comments, DOCTYPE.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (eof() || peek() != '<') return;
      if (peek_at(1) == '?') {
        skip_until("?>");
      } else if (peek_at(1) == '!' && peek_at(2) == '-' && peek_at(3) == '-') {
        skip_until("-->");
      } else if (peek_at(1) == '!') {
        skip_until(">");
      } else {
        return;
      }
    }
  }

  void skip_until(std::string_view terminator) {
    int start_line = line_;
    std::size_t found = in_.find(terminator, pos_);
    if (found == std::string_view::npos) {
      throw XmlError("unterminated construct starting", start_line);
    }
    while (pos_ < found + terminator.size()) advance();
  }

  static bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '-' || c == '.' || c == ':';
  }

  std::string parse_name() {
    std::size_t start = pos_;
    while (!eof() && is_name_char(peek())) advance();
    if (pos_ == start) throw XmlError("expected a name", line_);
    return std::string(in_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw, int at_line) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      std::size_t semi = raw.find(';', i);
      if (semi == std::string_view::npos) {
        throw XmlError("unterminated entity reference", at_line);
      }
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else if (!ent.empty() && ent[0] == '#') {
        long code = ent[1] == 'x' || ent[1] == 'X'
                        ? std::strtol(std::string(ent.substr(2)).c_str(), nullptr, 16)
                        : std::strtol(std::string(ent.substr(1)).c_str(), nullptr, 10);
        if (code <= 0 || code > 0x10FFFF) {
          throw XmlError("invalid character reference", at_line);
        }
        // UTF-8 encode
        unsigned long cp = static_cast<unsigned long>(code);
        if (cp < 0x80) {
          out += static_cast<char>(cp);
        } else if (cp < 0x800) {
          out += static_cast<char>(0xC0 | (cp >> 6));
          out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
          out += static_cast<char>(0xE0 | (cp >> 12));
          out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
          out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
          out += static_cast<char>(0xF0 | (cp >> 18));
          out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
          out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
          out += static_cast<char>(0x80 | (cp & 0x3F));
        }
      } else {
        throw XmlError("unknown entity '&" + std::string(ent) + ";'", at_line);
      }
      i = semi;
    }
    return out;
  }

  Element parse_element() {
    expect('<');
    Element el;
    el.line = line_;
    el.name = parse_name();

    // attributes
    for (;;) {
      skip_ws();
      if (eof()) throw XmlError("unterminated tag <" + el.name + ">", el.line);
      if (peek() == '/' || peek() == '>') break;
      std::string key = parse_name();
      skip_ws();
      expect('=');
      skip_ws();
      if (eof() || (peek() != '"' && peek() != '\'')) {
        throw XmlError("attribute '" + key + "' value must be quoted", line_);
      }
      char quote = advance();
      int value_line = line_;
      std::size_t start = pos_;
      while (!eof() && peek() != quote) {
        if (peek() == '<') throw XmlError("'<' inside attribute value", line_);
        advance();
      }
      if (eof()) throw XmlError("unterminated attribute value", value_line);
      std::string raw(in_.substr(start, pos_ - start));
      advance();  // closing quote
      for (const auto& [k, v] : el.attributes) {
        if (k == key) {
          throw XmlError("duplicate attribute '" + key + "'", el.line);
        }
      }
      el.attributes.emplace_back(std::move(key),
                                 decode_entities(raw, value_line));
    }

    if (peek() == '/') {
      advance();
      expect('>');
      return el;
    }
    expect('>');

    // content
    std::string text;
    for (;;) {
      if (eof()) throw XmlError("unterminated element <" + el.name + ">", el.line);
      if (peek() == '<') {
        if (peek_at(1) == '/') {
          advance();
          advance();
          std::string close = parse_name();
          if (close != el.name) {
            throw XmlError("mismatched close tag </" + close + "> for <" +
                               el.name + ">",
                           line_);
          }
          skip_ws();
          expect('>');
          el.text = scenkit::util::trim(text);
          return el;
        }
        if (peek_at(1) == '!' && peek_at(2) == '-' && peek_at(3) == '-') {
          skip_until("-->");
          continue;
        }
        if (peek_at(1) == '?') {
          skip_until("?>");
          continue;
        }
        if (peek_at(1) == '!') {
          throw XmlError("unsupported construct in element content", line_);
        }
        el.children.push_back(parse_element());
        continue;
      }
      int text_line = line_;
      std::size_t start = pos_;
      while (!eof() && peek() != '<') advance();
      text += decode_entities(in_.substr(start, pos_ - start), text_line);
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

void write_element(const Element& el, std::string& out, int depth) {
  std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  out += indent;
  out += '<';
  out += el.name;
  for (const auto& [k, v] : el.attributes) {
    out += ' ';
    out += k;
    out += "=\"";
    out += escape_text(v);
    out += '"';
  }
  if (el.children.empty() && el.text.empty()) {
    out += "/>\n";
    return;
  }
  out += '>';
  if (el.children.empty()) {
    out += escape_text(el.text);
    out += "</";
    out += el.name;
    out += ">\n";
    return;
  }
  out += '\n';
  if (!el.text.empty()) {
    out += indent;
    out += "  ";
    out += escape_text(el.text);
    out += '\n';
  }
  for (const auto& c : el.children) write_element(c, out, depth + 1);
  out += indent;
  out += "</";
  out += el.name;
  out += ">\n";
}

}  // namespace

Element parse(std::string_view input) {
  return Parser(input).parse_document();
}

std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string write_document(const Element& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  write_element(root, out, 0);
  return out;
}

}  // namespace scenkit::xml
