#include "kgagent/web.hpp"

#include <algorithm>
#include <set>

#include "kgagent/error.hpp"
#include "kgagent/http.hpp"
#include "kgagent/jsonl.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

std::vector<std::string> query_terms(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& tok : word_tokens(text)) {
    std::string n = normalize(tok);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

OfflineWebCorpus::OfflineWebCorpus(std::vector<CorpusRecord> records) {
  records_.reserve(records.size());
  for (auto& r : records) {
    std::set<std::string> terms;
    for (const auto& key : r.keys) {
      for (auto& t : query_terms(key)) terms.insert(std::move(t));
    }
    records_.push_back({{terms.begin(), terms.end()}, std::move(r.snippet)});
  }
}

OfflineWebCorpus OfflineWebCorpus::load(const std::filesystem::path& path) {
  std::vector<CorpusRecord> records;
  for (const auto& j : read_jsonl(path)) {
    try {
      records.push_back(
          {j.at("keys").get<std::vector<std::string>>(), j.at("snippet").get<std::string>()});
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ": bad corpus record: " + e.what());
    }
  }
  return OfflineWebCorpus(std::move(records));
}

std::vector<std::string> OfflineWebCorpus::search(std::string_view query, int k) const {
  auto q = query_terms(query);
  std::set<std::string> terms(q.begin(), q.end());
  std::vector<std::pair<size_t, size_t>> hits;  // (key count, record index)
  for (size_t i = 0; i < records_.size(); ++i) {
    const auto& keys = records_[i].terms;
    if (keys.empty()) continue;
    if (std::all_of(keys.begin(), keys.end(), [&](const auto& t) { return terms.count(t) != 0; })) {
      hits.emplace_back(keys.size(), i);
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (const auto& [_, idx] : hits) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(records_[idx].snippet);
  }
  return out;
}

std::vector<std::string> RemoteWebTool::search(std::string_view query, int k) const {
  json res = post_json(endpoint_, {{"query", std::string(query)}, {"k", k}});
  std::vector<std::string> out;
  try {
    for (const auto& s : res.at("snippets")) {
      if (static_cast<int>(out.size()) >= k) break;
      out.push_back(s.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed web search response: ") + e.what());
  }
  return out;
}

}  // namespace kgagent
