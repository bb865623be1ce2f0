#include "modiff/conditioning.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace modiff {

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus) {
  std::set<std::string> words;
  for (const auto& text : corpus)
    for (auto& w : tokenize_words(text)) words.insert(std::move(w));
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>"};
  v.tokens.insert(v.tokens.end(), words.begin(), words.end());
  return v;
}

std::vector<int> Vocabulary::encode(const std::string& text, int max_tokens) const {
  std::vector<int> ids;
  for (const auto& w : tokenize_words(text)) {
    if (int(ids.size()) >= max_tokens) break;
    const auto it = std::lower_bound(tokens.begin() + 2, tokens.end(), w);
    ids.push_back(it != tokens.end() && *it == w ? int(it - tokens.begin()) : kUnk);
  }
  if (ids.empty()) ids.push_back(kPad);
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path);
  for (size_t i = 0; i < tokens.size(); ++i) out << i << '\t' << tokens[i] << '\n';
  if (!out) throw IoError("short write to vocabulary: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed vocabulary line: " + line);
    const size_t id = std::stoul(line.substr(0, tab));
    if (id != v.tokens.size()) throw IoError("vocabulary ids must be dense and ordered");
    v.tokens.push_back(line.substr(tab + 1));
  }
  if (v.tokens.size() < 2 || v.tokens[0] != "<pad>" || v.tokens[1] != "<unk>")
    throw IoError("vocabulary missing reserved tokens");
  if (!std::is_sorted(v.tokens.begin() + 2, v.tokens.end()))
    throw IoError("vocabulary words must be sorted");
  return v;
}

}  // namespace modiff
