#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "crowdbias/crowdbias.hpp"

namespace testing_util {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("crowdbias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        std::ofstream(file(name), std::ios::binary) << content;
        return file(name);
    }

private:
    std::filesystem::path path_;
};

inline crowdbias::SyntheticSpec binary_spec(double acc0, double acc1, std::size_t per_annotator) {
    crowdbias::SyntheticSpec s;
    s.num_classes = 2;
    s.num_annotators = 2;
    s.samples_per_annotator = per_annotator;
    s.true_confusions = {crowdbias::SyntheticSpec::symmetric_confusion(2, acc0),
                         crowdbias::SyntheticSpec::symmetric_confusion(2, acc1)};
    s.class_priors = {0.5, 0.5};
    return s;
}

}  // namespace testing_util
