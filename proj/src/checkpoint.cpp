#include "ftarga/checkpoint.hpp"

#include "ftarga/error.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace ftarga {

using nlohmann::json;

std::string checkpoint_to_string(const MlpParams& params) {
    const MlpShape& shape = params.shape();
    json j;
    j["format"] = "ftarga-mlp";
    j["version"] = kCheckpointVersion;
    j["input_dim"] = shape.input_dim;
    j["hidden"] = shape.hidden;
    j["activation"] = std::string(to_string(shape.activation));
    j["clip"] = shape.output_clip ? json(*shape.output_clip) : json(nullptr);
    j["theta"] = std::vector<double>(params.theta().begin(), params.theta().end());
    return j.dump(1) + "\n";
}

MlpParams checkpoint_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "ftarga-mlp") {
            throw InvalidInput("not an ftarga checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw InvalidInput("unsupported checkpoint version " + std::to_string(version));
        }
        MlpShape shape;
        shape.input_dim = j.at("input_dim").get<std::size_t>();
        shape.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        shape.activation = activation_from_string(j.at("activation").get<std::string>());
        if (!j.at("clip").is_null()) {
            shape.output_clip = j.at("clip").get<double>();
        }
        return MlpParams(std::move(shape), j.at("theta").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("cannot write checkpoint " + path.string());
    }
    out << checkpoint_to_string(params);
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot read checkpoint " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_string(buffer.str());
}

}  // namespace ftarga
