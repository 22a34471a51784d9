#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "fradiag/data.hpp"
#include "fradiag/winding.hpp"

namespace test_util {

/// Scratch path under the build tree's temp directory.
inline std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "fradiag_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

/// Labels of a group with constant placeholder sweeps; cheap stand-in for generate_group.
inline fradiag::LabeledDataset label_only_dataset(fradiag::Group g) {
    fradiag::LabeledDataset ds{fradiag::connection_of(g), fradiag::winding_of(g), {}, {}};
    for (const auto& l : fradiag::group_labels(g))
        ds.samples.push_back({{Eigen::VectorXf::Constant(fradiag::kGridPoints, -20.0f), ds.grid.id()}, l, 0});
    return ds;
}

inline fradiag::LabeledDataset random_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> db(-80.0f, 0.0f);
    fradiag::LabeledDataset ds{fradiag::Connection::CIW, fradiag::WindingId::Disc10, {}, {}};
    const fradiag::FaultLabel labels[] = {{fradiag::FaultType::Normal, 0, 0},
                                          {fradiag::FaultType::FB, 2, 3},
                                          {fradiag::FaultType::DSV, 4, 71}};
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXf v(fradiag::kGridPoints);
        for (auto& x : v) x = db(rng);
        ds.samples.push_back({{v, ds.grid.id()}, labels[i % 3], static_cast<std::uint32_t>(rng())});
    }
    return ds;
}

}  // namespace test_util
