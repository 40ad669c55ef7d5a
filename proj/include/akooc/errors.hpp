#pragma once

#include <stdexcept>
#include <string>

namespace akooc {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error("DimensionMismatch: " + what) {}
};

struct ZeroImpedanceLine : Error {
    explicit ZeroImpedanceLine(const std::string& what) : Error("ZeroImpedanceLine: " + what) {}
};

struct IslandedBusDetected : Error {
    explicit IslandedBusDetected(const std::string& what) : Error("IslandedBusDetected: " + what) {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string& what) : Error("NonConvergence: " + what) {}
};

struct SingularJacobian : Error {
    explicit SingularJacobian(const std::string& what) : Error("SingularJacobian: " + what) {}
};

struct InsufficientHistory : Error {
    explicit InsufficientHistory(const std::string& what) : Error("InsufficientHistory: " + what) {}
};

struct InsufficientNeighbors : Error {
    explicit InsufficientNeighbors(const std::string& what) : Error("InsufficientNeighbors: " + what) {}
};

struct DegenerateWindow : Error {
    explicit DegenerateWindow(const std::string& what) : Error("DegenerateWindow: " + what) {}
};

struct NonFiniteUpdate : Error {
    explicit NonFiniteUpdate(const std::string& what) : Error("NonFiniteUpdate: " + what) {}
};

struct RiccatiDivergence : Error {
    explicit RiccatiDivergence(const std::string& what) : Error("RiccatiDivergence: " + what) {}
};

struct SingularInnerMatrix : Error {
    explicit SingularInnerMatrix(const std::string& what) : Error("SingularInnerMatrix: " + what) {}
};

struct NegativeDiscriminant : Error {
    explicit NegativeDiscriminant(const std::string& what) : Error("NegativeDiscriminant: " + what) {}
};

struct PlantCollapse : Error {
    explicit PlantCollapse(const std::string& what) : Error("PlantCollapse: " + what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("IoError: " + what) {}
};

struct UnknownChannel : Error {
    explicit UnknownChannel(const std::string& what) : Error("UnknownChannel: " + what) {}
};

struct ScenarioError : Error {
    explicit ScenarioError(const std::string& what) : Error("ScenarioError: " + what) {}
};

}  // namespace akooc
