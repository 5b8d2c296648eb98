#pragma once

#include <stdexcept>
#include <string>

namespace epic {

struct EmptyCalibration : std::runtime_error {
    EmptyCalibration() : std::runtime_error("calibration score set is empty") {}
};

struct NonFiniteScore : std::runtime_error {
    explicit NonFiniteScore(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidN : std::invalid_argument {
    explicit InvalidN(const std::string& what) : std::invalid_argument(what) {}
};

struct InvalidAlpha : std::invalid_argument {
    explicit InvalidAlpha(const std::string& what) : std::invalid_argument(what) {}
};

struct InsufficientData : std::runtime_error {
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

struct SingularKernel : std::runtime_error {
    explicit SingularKernel(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownLabel : std::invalid_argument {
    explicit UnknownLabel(const std::string& what) : std::invalid_argument(what) {}
};

struct NotAClassifier : std::logic_error {
    NotAClassifier() : std::logic_error("model has no label distribution") {}
};

struct NotAScoreModel : std::logic_error {
    NotAScoreModel() : std::logic_error("model has no score CDF") {}
};

struct SplitTooSmall : std::runtime_error {
    explicit SplitTooSmall(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateBand : std::runtime_error {
    explicit DegenerateBand(const std::string& what) : std::runtime_error(what) {}
};

struct LengthMismatch : std::invalid_argument {
    explicit LengthMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct AlphabetMismatch : std::invalid_argument {
    explicit AlphabetMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct InvalidT : std::invalid_argument {
    explicit InvalidT(const std::string& what) : std::invalid_argument(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingColumn : std::runtime_error {
    explicit MissingColumn(const std::string& what) : std::runtime_error(what) {}
};

struct RowCountMismatch : std::runtime_error {
    explicit RowCountMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace epic
