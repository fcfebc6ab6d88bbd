#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kgagent {

/// External document search. Implementations must tolerate concurrent calls.
class WebTool {
 public:
  virtual ~WebTool() = default;
  /// At most `k` snippets. Throws TransportError when the provider is unreachable.
  virtual std::vector<std::string> search(std::string_view query, int k) const = 0;
};

struct CorpusRecord {
  std::vector<std::string> keys;  // normalized terms
  std::string snippet;
};

/// Deterministic offline stand-in for a search engine. A record matches when
/// every one of its key terms occurs among the query terms; matches rank by
/// key count, then corpus order.
class OfflineWebCorpus final : public WebTool {
 public:
  OfflineWebCorpus() = default;
  explicit OfflineWebCorpus(std::vector<CorpusRecord> records);

  static OfflineWebCorpus load(const std::filesystem::path& path);

  std::vector<std::string> search(std::string_view query, int k) const override;
  size_t size() const { return records_.size(); }

 private:
  struct Indexed {
    std::vector<std::string> terms;
    std::string snippet;
  };
  std::vector<Indexed> records_;
};

/// POST {"query", "k"} -> {"snippets": [...]}.
class RemoteWebTool final : public WebTool {
 public:
  explicit RemoteWebTool(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<std::string> search(std::string_view query, int k) const override;

 private:
  std::string endpoint_;
};

/// Query terms as the corpus sees them: normalized word tokens.
std::vector<std::string> query_terms(std::string_view text);

}  // namespace kgagent
