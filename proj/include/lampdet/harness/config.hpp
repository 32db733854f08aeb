#ifndef LAMPDET_HARNESS_CONFIG_HPP
#define LAMPDET_HARNESS_CONFIG_HPP

#include "lampdet/error.hpp"
#include "lampdet/refine.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lampdet::harness
{

enum class LampStates
{
    AllOn,
    AllOff,
    Alternate,
    Random
};

struct SceneConfig
{
    // room
    double room_x = 8.0;
    double room_y = 6.0;
    double ceiling_height = 3.0;

    // lamps
    int lamp_rows = 2;
    int lamp_cols = 3;
    std::vector<int> lamp_models{0, 1, 2, 3, 4}; // cycled over the grid in row-major order
    std::optional<Eigen::Vector2d> lamp_origin;  // first lamp; default centres the grid cells
    std::optional<Eigen::Vector2d> lamp_spacing;
    double hanging_offset = 0.0;
    LampStates lamp_states = LampStates::Alternate;

    // camera
    int image_width = 320;
    int image_height = 240;
    double focal = 260.0;
    double camera_height = 1.5;
    double camera_pitch_deg = 25.0; // tilt from vertical towards the walking direction
    double max_range = 4.0;

    // trajectory
    std::vector<Eigen::Vector2d> waypoints;
    int frames = 0;

    // noise
    double endpoint_sigma = 0.0;    // px
    double orientation_sigma = 0.0; // rad
    int clutter = 0;
    double dropout = 0.0;
    double state_noise = 0.1; // observed brightness noise

    std::uint64_t seed = 1;

    void validate() const;
};

struct PipelineConfig
{
    RefineMethod method = RefineMethod::D2CO_IT;
    double subdivision = 0.25;
    bool plane_estimation = true;
    double init_rotation_deg = 5.0;
    double init_translation = 0.10;
    double depth_sigma = 0.0; // m, along the camera ray
    double score_sigma = 2.0;
    double cluster_radius = 0.5;
    double link_radius = 0.5;
    double msac_max_distance = 0.30;
    int msac_iterations = 200;
    int threads = 1;
    int n_orient = kDefaultOrientations;
    double lambda_theta = kDefaultLambdaTheta;

    void validate() const;
};

struct Config
{
    SceneConfig scene;
    PipelineConfig pipeline;
};

namespace detail
{
inline std::vector<double> parse_numbers(const std::string& text, const std::string& key)
{
    std::vector<double> out;
    std::string cleaned = text;
    for (char& c : cleaned)
        if (c == ',' || c == ';')
            c = ' ';
    std::istringstream ss(cleaned);
    std::string tok;
    while (ss >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("config: bad number '" + tok + "' in " + key);
        }
    }
    return out;
}

template <typename T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback)
{
    const auto node = pt.get_optional<std::string>(key);
    if (!node)
        return fallback;
    std::istringstream ss(*node);
    T value;
    ss >> value;
    std::string rest;
    if (ss.fail() || (ss >> rest))
        throw ConfigError("config: bad value for " + key + ": '" + *node + "'");
    return value;
}

inline bool get_flag(const boost::property_tree::ptree& pt, const std::string& key, bool fallback)
{
    const auto node = pt.get_optional<std::string>(key);
    if (!node)
        return fallback;
    if (*node == "on" || *node == "true" || *node == "1" || *node == "yes")
        return true;
    if (*node == "off" || *node == "false" || *node == "0" || *node == "no")
        return false;
    throw ConfigError("config: bad flag for " + key + ": '" + *node + "'");
}

inline std::optional<Eigen::Vector2d> get_pair(const boost::property_tree::ptree& pt, const std::string& key)
{
    const auto node = pt.get_optional<std::string>(key);
    if (!node)
        return std::nullopt;
    const auto v = parse_numbers(*node, key);
    if (v.size() != 2)
        throw ConfigError("config: " + key + " needs two numbers");
    return Eigen::Vector2d(v[0], v[1]);
}
} // namespace detail

inline void SceneConfig::validate() const
{
    if (!(room_x > 0.0) || !(room_y > 0.0) || !(ceiling_height > 0.0))
        throw ConfigError("config: room dimensions must be positive");
    if (lamp_rows < 0 || lamp_cols < 0)
        throw ConfigError("config: lamp grid size must be non-negative");
    if (lamp_rows * lamp_cols > 0 && lamp_models.empty())
        throw ConfigError("config: lamp_models is empty");
    for (int m : lamp_models)
        if (m < 0 || m > 4)
            throw ConfigError("config: lamp model ids are 0..4");
    if (hanging_offset < 0.0 || hanging_offset >= ceiling_height)
        throw ConfigError("config: hanging_offset must lie in [0, ceiling_height)");
    if (image_width < 16 || image_height < 16 || !(focal > 0.0))
        throw ConfigError("config: bad camera intrinsics");
    if (!(camera_height > 0.0) || camera_height >= ceiling_height - hanging_offset)
        throw ConfigError("config: camera must sit between the floor and the lamps");
    if (!(max_range > 0.0))
        throw ConfigError("config: max_range must be positive");
    if (frames < 0 || (frames > 0 && waypoints.empty()))
        throw ConfigError("config: frames need at least one waypoint");
    if (endpoint_sigma < 0.0 || orientation_sigma < 0.0 || state_noise < 0.0 || clutter < 0)
        throw ConfigError("config: noise parameters must be non-negative");
    if (dropout < 0.0 || dropout > 1.0)
        throw ConfigError("config: dropout must lie in [0, 1]");
}

inline void PipelineConfig::validate() const
{
    if (!(subdivision > 0.0) || subdivision > 1.0)
        throw ConfigError("config: subdivision must lie in (0, 1]");
    if (init_rotation_deg < 0.0 || init_translation < 0.0 || depth_sigma < 0.0)
        throw ConfigError("config: perturbations must be non-negative");
    if (!(score_sigma > 0.0) || !(cluster_radius > 0.0) || !(link_radius > 0.0) || !(msac_max_distance > 0.0))
        throw ConfigError("config: sigma and radii must be positive");
    if (msac_iterations < 1 || threads < 1 || n_orient < 2 || !(lambda_theta >= 0.0))
        throw ConfigError("config: bad pipeline counts");
}

/// Reads an INI document. Unknown keys are ignored; missing keys keep their defaults.
inline Config parse_config(std::istream& in)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + e.message() + " at line " + std::to_string(e.line()));
    }
    using detail::get;
    Config c;
    SceneConfig& s = c.scene;
    s.room_x = get(tree, "scene.room_x", s.room_x);
    s.room_y = get(tree, "scene.room_y", s.room_y);
    s.ceiling_height = get(tree, "scene.ceiling_height", s.ceiling_height);
    s.lamp_rows = get(tree, "scene.lamp_rows", s.lamp_rows);
    s.lamp_cols = get(tree, "scene.lamp_cols", s.lamp_cols);
    if (const auto models = tree.get_optional<std::string>("scene.lamp_models")) {
        s.lamp_models.clear();
        for (double v : detail::parse_numbers(*models, "scene.lamp_models")) {
            if (v != static_cast<int>(v))
                throw ConfigError("config: lamp model ids must be integers");
            s.lamp_models.push_back(static_cast<int>(v));
        }
    }
    s.lamp_origin = detail::get_pair(tree, "scene.lamp_origin");
    s.lamp_spacing = detail::get_pair(tree, "scene.lamp_spacing");
    s.hanging_offset = get(tree, "scene.hanging_offset", s.hanging_offset);
    if (const auto st = tree.get_optional<std::string>("scene.lamp_states")) {
        if (*st == "on")
            s.lamp_states = LampStates::AllOn;
        else if (*st == "off")
            s.lamp_states = LampStates::AllOff;
        else if (*st == "alternate")
            s.lamp_states = LampStates::Alternate;
        else if (*st == "random")
            s.lamp_states = LampStates::Random;
        else
            throw ConfigError("config: lamp_states must be on, off, alternate or random");
    }
    s.seed = get<std::uint64_t>(tree, "scene.seed", s.seed);

    s.image_width = get(tree, "camera.image_width", s.image_width);
    s.image_height = get(tree, "camera.image_height", s.image_height);
    s.focal = get(tree, "camera.focal", s.focal);
    s.camera_height = get(tree, "camera.elevation", s.camera_height);
    s.camera_pitch_deg = get(tree, "camera.pitch_deg", s.camera_pitch_deg);
    s.max_range = get(tree, "camera.max_range", s.max_range);

    if (const auto wp = tree.get_optional<std::string>("trajectory.waypoints")) {
        const auto v = detail::parse_numbers(*wp, "trajectory.waypoints");
        if (v.size() % 2 != 0)
            throw ConfigError("config: waypoints need x y pairs");
        for (std::size_t i = 0; i < v.size(); i += 2)
            s.waypoints.emplace_back(v[i], v[i + 1]);
    }
    s.frames = get(tree, "trajectory.frames", s.frames);

    s.endpoint_sigma = get(tree, "noise.endpoint_sigma", s.endpoint_sigma);
    s.orientation_sigma = get(tree, "noise.orientation_sigma", s.orientation_sigma);
    s.clutter = get(tree, "noise.clutter", s.clutter);
    s.dropout = get(tree, "noise.dropout", s.dropout);
    s.state_noise = get(tree, "noise.state_noise", s.state_noise);

    PipelineConfig& p = c.pipeline;
    if (const auto m = tree.get_optional<std::string>("pipeline.method")) {
        try {
            p.method = parse_method(*m);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    p.subdivision = get(tree, "pipeline.subdivision", p.subdivision);
    p.plane_estimation = detail::get_flag(tree, "pipeline.plane_estimation", p.plane_estimation);
    p.init_rotation_deg = get(tree, "pipeline.init_rotation_deg", p.init_rotation_deg);
    p.init_translation = get(tree, "pipeline.init_translation", p.init_translation);
    p.depth_sigma = get(tree, "pipeline.depth_sigma", p.depth_sigma);
    p.score_sigma = get(tree, "pipeline.score_sigma", p.score_sigma);
    p.cluster_radius = get(tree, "pipeline.cluster_radius", p.cluster_radius);
    p.link_radius = get(tree, "pipeline.link_radius", p.link_radius);
    p.msac_max_distance = get(tree, "pipeline.msac_max_distance", p.msac_max_distance);
    p.msac_iterations = get(tree, "pipeline.msac_iterations", p.msac_iterations);
    p.threads = get(tree, "pipeline.threads", p.threads);
    p.n_orient = get(tree, "pipeline.orientations", p.n_orient);
    p.lambda_theta = get(tree, "pipeline.lambda_theta", p.lambda_theta);

    s.validate();
    p.validate();
    return c;
}

inline Config load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

} // namespace lampdet::harness

#endif // LAMPDET_HARNESS_CONFIG_HPP
