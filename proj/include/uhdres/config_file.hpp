#pragma once

#include "uhdres/model.hpp"
#include "uhdres/trainer.hpp"

namespace uhdres {

struct FileConfig {
    UHDResConfig model;
    TrainConfig train;
};

// Flat UTF-8 key=value lines; '#' starts a comment; blank lines ignored.
// Unknown keys are errors that name the key.
FileConfig parse_config_text(const std::string& text);
FileConfig parse_config_file(const std::string& path);

}  // namespace uhdres
