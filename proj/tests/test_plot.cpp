#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fradiag/plot.hpp"
#include "test_util.hpp"

using namespace fradiag;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("bode plot", "[plot]") {
    const auto ds = test_util::random_dataset(2, 3);
    const std::vector<BodeSeries> series{{"a", ds.samples[0].sweep}, {"b", ds.samples[1].sweep}};
    const auto plot = bode_plot(FrequencyGrid{}, series, "two curves");
    CHECK(count(plot.svg, "class=\"curve\"") == 2);
    const auto first = plot.svg.find("points=\"");
    const auto end = plot.svg.find('"', first + 8);
    const std::string points = plot.svg.substr(first + 8, end - first - 8);
    CHECK(count(points, ",") == 2000);
    CHECK(count(plot.csv, "\n") == 2001);
    CHECK(plot.csv.rfind("frequency_hz,a,b\n", 0) == 0);
    CHECK(bode_plot(FrequencyGrid{}, series, "two curves").svg == plot.svg);
    CHECK_THROWS_AS(bode_plot(FrequencyGrid{}, std::span<const BodeSeries>{}, "none"), DomainError);
}

TEST_CASE("confusion plot", "[plot]") {
    ConfusionMatrix cm(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int n = 0; n < i + 2 * j; ++n) cm.add(i, j);
    const auto plot = confusion_plot(cm, {"Normal", "AD", "DSV", "FB"}, "cm");
    CHECK(count(plot.svg, "<text class=\"cell\"") == 16);
    CHECK(plot.svg.find(">7</text>") != std::string::npos);
    CHECK(count(plot.csv, "\n") == 5);
    CHECK_THROWS_AS(confusion_plot(cm, {"a"}, "cm"), DomainError);
}

TEST_CASE("CC-ED plot and files", "[plot]") {
    const auto ds = test_util::random_dataset(12, 5);
    const auto stats = cc_ed_map(ds, [](const FaultLabel& l) { return l.type != FaultType::Normal; });
    const auto plot = cced_plot(stats, "map");
    CHECK(count(plot.svg, "class=\"point\"") == 8);
    CHECK(plot.csv.rfind("type,degree,position,cc,ed\n", 0) == 0);
    CHECK(count(plot.csv, "\n") == 9);

    const auto path = test_util::temp_path("map.svg");
    write_plot(plot, path);
    std::ifstream svg(path), csv(test_util::temp_path("map.csv"));
    std::stringstream a, b;
    a << svg.rdbuf();
    b << csv.rdbuf();
    CHECK(a.str() == plot.svg);
    CHECK(b.str() == plot.csv);
    CHECK_THROWS_AS(cced_plot(CurveStats{}, "empty"), DomainError);
}
