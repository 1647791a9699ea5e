#pragma once

#include <stdexcept>
#include <string>

namespace starkloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidKernel : public Error {
public:
    using Error::Error;
};

class InvalidPotential : public Error {
public:
    using Error::Error;
};

/// A Maryland site sits within the guard distance of a pole of tan(pi x).
class MarylandResonance : public Error {
public:
    MarylandResonance(int site, double distance)
        : Error("Maryland resonance at site " + std::to_string(site) +
                ": distance to pole " + std::to_string(distance)),
          site_(site), distance_(distance) {}

    int site() const noexcept { return site_; }
    double distance() const noexcept { return distance_; }

private:
    int site_;
    double distance_;
};

class DimensionOverflow : public Error {
public:
    DimensionOverflow(long dimension, long maximum)
        : Error("operator dimension " + std::to_string(dimension) +
                " exceeds configured maximum " + std::to_string(maximum)) {}
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// Raised when a theorem check is asked to run on a potential it does not cover.
class WrongPotentialFamily : public Error {
public:
    using Error::Error;
};

class NoInteriorModes : public Error {
public:
    using Error::Error;
};

class SourceOutsideInterior : public Error {
public:
    SourceOutsideInterior(int site, int interior_radius)
        : Error("source site " + std::to_string(site) +
                " lies outside the interior window |k| <= " +
                std::to_string(interior_radius)) {}
};

/// Configuration rejected during validation; `path` names the offending field.
class ConfigInvalid : public Error {
public:
    ConfigInvalid(std::string path, const std::string& message)
        : Error(path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class StageFailure : public Error {
public:
    StageFailure(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace starkloc
