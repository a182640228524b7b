#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <bookforge/bookforge.hpp>

namespace fixture {

inline bookforge::Article article(std::string id, std::string title, std::vector<std::string> links = {},
                                  std::string text = "", std::vector<std::string> categories = {},
                                  std::vector<std::int64_t> pageviews = {}) {
    bookforge::Article a;
    a.id = std::move(id);
    a.title = std::move(title);
    a.out_links = std::move(links);
    a.text = std::move(text);
    a.categories = std::move(categories);
    a.pageviews = std::move(pageviews);
    return a;
}

/// Chain corpus "s" -> "a" -> "b" -> ... with the given ids.
inline bookforge::Corpus chain(const std::vector<std::string>& ids) {
    std::vector<bookforge::Article> arts;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<std::string> links;
        if (i + 1 < ids.size()) links.push_back(ids[i + 1]);
        arts.push_back(article(ids[i], "title " + ids[i], links, "text of " + ids[i]));
    }
    return bookforge::Corpus(std::move(arts));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("bookforge_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline bool all_finite(const bookforge::FeatureMatrix& rows) {
    for (const auto& r : rows)
        for (double v : r)
            if (!std::isfinite(v)) return false;
    return true;
}

} // namespace fixture
