// eitpod command-line driver: mesh, simulate, pod, place, project, eval, render.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eitpod/eitpod.hpp"

namespace {

using namespace eitpod;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

constexpr int kDefaultSegments = 64;
constexpr double kDefaultDensity = 1.0;
constexpr int kDefaultSlots = 16;

// Relative output paths are placed under $EITPOD_OUTPUT_DIR when it is set.
std::string output_path(const std::string& p) {
    const char* dir = std::getenv("EITPOD_OUTPUT_DIR");
    if (!dir || !*dir || fs::path(p).is_absolute()) return p;
    fs::create_directories(dir);
    return (fs::path(dir) / p).string();
}

std::set<int> parse_index_list(const std::string& s) {
    std::set<int> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.insert(v);
        } catch (const std::exception&) {
            throw InvalidArgument("bad index list '" + s + "'");
        }
    }
    return out;
}

std::string join(const std::set<int>& s) {
    std::string out;
    for (int v : s) out += (out.empty() ? "" : ",") + std::to_string(v);
    return out.empty() ? "none" : out;
}

Mesh load_mesh(const std::string& path) {
    if (path.empty()) return build_disk_mesh(1.0, kDefaultSegments, kDefaultDensity);
    return mesh_from_json(io::read_json(path));
}

int meta_int(const io::Metadata& meta, const std::string& key, const std::string& origin) {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError(origin + ": header lacks " + key);
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw DataError(origin + ": bad " + key + " value");
    }
}

// Protocol recorded in a frames header, checked against its hash.
Protocol frames_protocol(const io::FrameFile& f, const std::string& origin) {
    const Protocol p = skip_protocol(meta_int(f.meta, "electrodes", origin));
    if (protocol_id(p) != f.meta.at("protocol_id"))
        throw DataError(origin + ": protocol_id does not match a skip protocol on " + f.meta.at("electrodes") +
                        " electrodes");
    return p;
}

struct LoadedBasis {
    PodBasis basis;
    Protocol protocol;
    std::string id;
};

LoadedBasis load_basis(const std::string& path) {
    const auto j = io::read_json(path);
    LoadedBasis out;
    out.basis = pod_from_json(j);
    if (!j.contains("electrode_count")) throw DataError(path + ": basis lacks electrode_count");
    out.protocol = skip_protocol(j.at("electrode_count").get<int>());
    if (protocol_id(out.protocol) != out.basis.protocol_id)
        throw DataError(path + ": protocol_id does not match its electrode_count");
    out.id = basis_id(out.basis);
    return out;
}

// --- mesh -------------------------------------------------------------------

struct MeshArgs {
    double radius = 1.0;
    int segments = kDefaultSegments;
    double density = kDefaultDensity;
    std::string out;
};

void run_mesh(const MeshArgs& a) {
    const Mesh m = build_disk_mesh(a.radius, a.segments, a.density);
    io::write_json(output_path(a.out), to_json(m));
    std::cout << "mesh: " << m.node_count() << " nodes, " << m.element_count() << " elements -> " << a.out << "\n";
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string mesh, spec, out, truth_out, jacobian_out;
    int frames = 0;
    long long seed = -1;
    int slots = kDefaultSlots;
    int electrodes = 8;
    double contact = kDefaultContactImpedance;
};

void run_simulate(const SimulateArgs& a) {
    const Mesh mesh = load_mesh(a.mesh);
    SessionSpec spec = a.spec.empty() ? default_session() : session_from_json(io::read_json(a.spec));
    if (a.frames > 0) spec.frame_count = a.frames;
    if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);

    const ElectrodeLayout layout = layout_from_slots(a.slots, even_slots(a.slots, a.electrodes),
                                                     default_half_width(a.slots), a.contact);
    const Protocol protocol = skip_protocol(a.electrodes);
    const Session s = simulate_session(mesh, layout, protocol, spec);

    io::Metadata meta{{"protocol_id", protocol_id(protocol)},
                      {"electrodes", std::to_string(a.electrodes)},
                      {"mesh_id", mesh_id(mesh)},
                      {"layout_id", layout_id(layout)},
                      {"seed", std::to_string(spec.seed)},
                      {"kind", "frames"}};
    io::write_frames(output_path(a.out), s.frames.frames, meta);

    std::string truth = a.truth_out;
    if (truth.empty()) {
        fs::path p(a.out);
        truth = (p.parent_path() / (p.stem().string() + "_truth" + p.extension().string())).string();
    }
    meta["kind"] = "truth";
    io::write_frames(output_path(truth), s.truth, meta);

    if (!a.jacobian_out.empty()) {
        const Jacobian j = compute_jacobian(mesh, Conductivity::uniform(mesh), layout, protocol);
        io::write_text(output_path(a.jacobian_out), io::jacobian_to_bytes(j));
    }
    std::cout << "simulate: " << spec.frame_count << " frames x " << protocol.size() << " measurements -> "
              << a.out << " (+ " << truth << ")\n";
}

// --- pod --------------------------------------------------------------------

struct PodArgs {
    std::string in, out, conditioning_out;
    bool center = false;
    int modes = -1;
};

void run_pod(const PodArgs& a) {
    const auto f = io::read_frames(a.in);
    const Protocol protocol = frames_protocol(f, a.in);
    if (f.frames.rows() != static_cast<Eigen::Index>(protocol.size()))
        throw DataError(a.in + ": frame length does not match the protocol");
    SnapshotMatrix u{f.frames, f.meta.at("protocol_id"), {}};
    const PodBasis b = fit_pod(u, a.center, a.modes);

    auto j = to_json(b);
    j["electrode_count"] = protocol.electrode_count;
    j["source_frames"] = io::file_hash(a.in);
    io::write_json(output_path(a.out), j);

    if (!a.conditioning_out.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : conditioning_report(b, protocol, f.frames)) {
            nlohmann::json row{{"electrode", r.electrode},
                               {"reduced_size", r.reduced_size},
                               {"condition", std::isfinite(r.condition) ? nlohmann::json(r.condition)
                                                                          : nlohmann::json(nullptr)},
                               {"flagged", r.flagged}};
            row["residual"] = std::isnan(r.residual) ? nlohmann::json(nullptr) : nlohmann::json(r.residual);
            rows.push_back(row);
        }
        nlohmann::json report{{"protocol_id", b.protocol_id}, {"basis_id", basis_id(b)}, {"rows", rows}};
        io::write_json(output_path(a.conditioning_out), report);
    }
    std::cout << "pod: " << b.rank() << " modes, first 5 capture " << captured_fraction(b, 5) * 100.0
              << "% -> " << a.out << "\n";
}

// --- place ------------------------------------------------------------------

struct PlaceArgs {
    int slots = kDefaultSlots;
    int reference_slots = kDefaultSlots;
    int select = 8;
    int modes = 20;
    std::string mesh, basis, out, score = "gram";
    unsigned threads = 0;
};

void run_place(const PlaceArgs& a) {
    const Mesh mesh = load_mesh(a.mesh);
    const LoadedBasis lb = load_basis(a.basis);
    const ElectrodeLayout reference =
        layout_from_slots(a.reference_slots, even_slots(a.reference_slots, lb.protocol.electrode_count),
                          default_half_width(a.reference_slots));
    PlacementOptions opts;
    opts.threads = a.threads;
    if (a.score == "data")
        opts.mode = ScoreMode::DataSpaceGram;
    else if (a.score != "gram")
        throw InvalidArgument("--score must be gram or data");
    const auto scores = optimize_placement(mesh, lb.basis, reference, a.slots, a.select, a.modes, opts);

    nlohmann::json cands = nlohmann::json::array();
    for (const auto& s : scores) cands.push_back(to_json(s));
    nlohmann::json report{{"protocol_id", lb.basis.protocol_id},
                          {"basis_id", lb.id},
                          {"mesh_id", mesh_id(mesh)},
                          {"slots", a.slots},
                          {"select", a.select},
                          {"modes", a.modes},
                          {"score", a.score},
                          {"candidates", cands}};
    io::write_json(output_path(a.out), report);
    std::cout << "place: " << scores.size() << " candidates, best {";
    for (std::size_t i = 0; i < scores.front().slots.size(); ++i)
        std::cout << (i ? "," : "") << scores.front().slots[i];
    std::cout << "} log S = " << scores.front().log_score << " -> " << a.out << "\n";
}

// --- project ----------------------------------------------------------------

struct ProjectArgs {
    std::string basis, bad, in, out;
    bool regularized = false;
    bool independent = false;
    int modes = 0;
    double threshold = 1e8;
};

void run_project(const ProjectArgs& a) {
    const LoadedBasis lb = load_basis(a.basis);
    const auto f = io::read_frames(a.in);
    if (f.meta.at("protocol_id") != lb.basis.protocol_id)
        throw DataError(a.in + ": protocol_id " + f.meta.at("protocol_id") + " does not match basis " +
                        lb.basis.protocol_id);

    std::set<int> bad;
    if (a.bad == "auto") {
        if (f.frames.rows() != static_cast<Eigen::Index>(lb.protocol.size()))
            throw InvalidArgument("--bad auto needs full-length input frames");
        bad = detect_bad_electrodes(f.frames, lb.protocol);
    } else {
        bad = parse_index_list(a.bad);
    }

    ProjectorOptions opts;
    opts.regularized = a.regularized;
    opts.condition_threshold = a.threshold;
    if (a.modes > 0) opts.modes = a.modes;
    opts.onsager_modes = a.independent;
    const ProjectionOperator op = build_projector(lb.basis, lb.protocol, bad, opts);

    Eigen::MatrixXd reduced;
    if (f.frames.rows() == op.full_size()) {
        reduced.resize(op.reduced_size(), f.frames.cols());
        for (Eigen::Index c = 0; c < f.frames.cols(); ++c)
            reduced.col(c) = restrict_frame(f.frames.col(c), op.valid_indices);
    } else if (f.frames.rows() == op.reduced_size()) {
        reduced = f.frames;
    } else {
        throw DataError(a.in + ": frames have " + std::to_string(f.frames.rows()) + " columns, expected " +
                        std::to_string(op.full_size()) + " or " + std::to_string(op.reduced_size()));
    }
    Eigen::MatrixXd out(op.full_size(), reduced.cols());
    for (Eigen::Index c = 0; c < reduced.cols(); ++c) out.col(c) = apply_projector(op, reduced.col(c));

    io::Metadata meta{{"protocol_id", op.protocol_id},
                      {"electrodes", std::to_string(lb.protocol.electrode_count)},
                      {"basis_id", op.basis_id},
                      {"bad", join(bad)},
                      {"valid", std::to_string(op.reduced_size())},
                      {"modes", std::to_string(op.modes_used)},
                      {"condition", io::format_double(op.condition)},
                      {"source_frames", io::file_hash(a.in)},
                      {"kind", "projected"}};
    io::write_frames(output_path(a.out), out, meta);
    std::cout << "project: bad {" << join(bad) << "}, D' = " << op.reduced_size() << ", " << op.modes_used
              << " modes, condition " << op.condition << ", " << out.cols() << " frames -> " << a.out << "\n";
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string truth, projected, observed, out;
};

void run_eval(const EvalArgs& a) {
    const auto truth = io::read_frames(a.truth);
    const auto proj = io::read_frames(a.projected);
    if (truth.meta.at("protocol_id") != proj.meta.at("protocol_id"))
        throw DataError("eval: protocol_id mismatch between truth and projected frames");
    if (truth.frames.rows() != proj.frames.rows() || truth.frames.cols() != proj.frames.cols())
        throw DataError("eval: truth and projected frames differ in shape");

    Eigen::MatrixXd baseline;
    if (proj.meta.count("bad")) {
        const Protocol protocol = frames_protocol(proj, a.projected);
        const std::string bad_s = proj.meta.at("bad");
        const auto valid = valid_subset(protocol, bad_s == "none" ? std::set<int>{} : parse_index_list(bad_s));
        Eigen::MatrixXd observed = truth.frames;
        if (!a.observed.empty()) {
            const auto obs = io::read_frames(a.observed);
            if (obs.meta.at("protocol_id") != truth.meta.at("protocol_id"))
                throw DataError("eval: protocol_id mismatch for observed frames");
            if (obs.frames.rows() != truth.frames.rows() || obs.frames.cols() != truth.frames.cols())
                throw DataError("eval: observed frames differ in shape");
            observed = obs.frames;
        }
        baseline = zero_fill(observed, valid);
    }
    const EvalReport r = eval_projection(truth.frames, proj.frames, baseline);

    auto j = to_json(r);
    j["protocol_id"] = truth.meta.at("protocol_id");
    j["truth"] = io::file_hash(a.truth);
    j["projected_file"] = io::file_hash(a.projected);
    if (!a.observed.empty()) j["observed"] = io::file_hash(a.observed);
    if (!a.out.empty()) io::write_json(output_path(a.out), j);

    std::printf("%-12s %12s %12s %12s\n", "", "median", "mean", "p95");
    std::printf("%-12s %12.6g %12.6g %12.6g\n", "projected", r.projected.median, r.projected.mean, r.projected.p95);
    if (!r.baseline.empty()) {
        std::printf("%-12s %12.6g %12.6g %12.6g\n", "zero-fill", r.zero_fill.median, r.zero_fill.mean,
                    r.zero_fill.p95);
        std::printf("projected beats zero-fill on %.1f%% of %zu frames\n", 100.0 * r.fraction_better,
                    r.errors.size());
    }
    std::printf("(measurement-space relative L2 error)\n");
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
    std::string basis, jacobian, mesh, modes = "1,2,3", out;
    int size = 320;
    double range = 0.0;
};

void run_render(const RenderArgs& a) {
    const Mesh mesh = load_mesh(a.mesh);
    const LoadedBasis lb = load_basis(a.basis);
    const Jacobian j = io::jacobian_from_bytes(io::read_text(a.jacobian));
    if (j.protocol_id != lb.basis.protocol_id) throw DataError("render: Jacobian and basis protocols differ");
    if (j.matrix.cols() != static_cast<Eigen::Index>(mesh.element_count()))
        throw DataError("render: Jacobian columns do not match the mesh element count");

    RenderSpec spec;
    spec.size = a.size;
    spec.color_range = a.range;
    spec.panel_modes.clear();
    for (int m : parse_index_list(a.modes)) spec.panel_modes.push_back(m);
    const int needed = *std::max_element(spec.panel_modes.begin(), spec.panel_modes.end());
    const MeshPod mp = mesh_pod(j, lb.basis, needed);
    io::write_text(output_path(a.out), render_mesh_fields_svg(mesh, mp.matrix, spec));
    std::cout << "render: " << spec.panel_modes.size() << " panels -> " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"POD tools for electrode placement and dropout compensation in EIT armbands"};
    app.require_subcommand(1);

    MeshArgs mesh_args;
    auto* mesh_cmd = app.add_subcommand("mesh", "Build a triangulated disk mesh");
    mesh_cmd->add_option("--radius", mesh_args.radius, "Disk radius")->capture_default_str();
    mesh_cmd->add_option("--segments", mesh_args.segments, "Boundary segments")->capture_default_str();
    mesh_cmd->add_option("--density", mesh_args.density, "Interior ring density")->capture_default_str();
    mesh_cmd->add_option("--out", mesh_args.out, "Mesh JSON output")->required();

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a synthetic measurement session");
    sim_cmd->add_option("--mesh", sim.mesh, "Mesh JSON (default: built-in disk)");
    sim_cmd->add_option("--spec", sim.spec, "Session spec JSON (default: built-in smooth session)");
    sim_cmd->add_option("--frames", sim.frames, "Override frame count");
    sim_cmd->add_option("--seed", sim.seed, "Override RNG seed");
    sim_cmd->add_option("--slots", sim.slots, "Boundary slots")->capture_default_str();
    sim_cmd->add_option("--electrodes", sim.electrodes, "Evenly spaced electrodes")->capture_default_str();
    sim_cmd->add_option("--contact", sim.contact, "Contact impedance")->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Frames CSV output")->required();
    sim_cmd->add_option("--truth-out", sim.truth_out, "Noise-free frames CSV (default: <out>_truth.csv)");
    sim_cmd->add_option("--jacobian-out", sim.jacobian_out, "Reference Jacobian binary output");

    PodArgs pod_args;
    auto* pod_cmd = app.add_subcommand("pod", "Fit a POD basis to frames");
    pod_cmd->add_option("--in", pod_args.in, "Frames CSV")->required();
    pod_cmd->add_option("--out", pod_args.out, "Basis JSON output")->required();
    pod_cmd->add_flag("--center", pod_args.center, "Subtract the mean frame");
    pod_cmd->add_option("--modes", pod_args.modes, "Maximum number of modes");
    pod_cmd->add_option("--conditioning-out", pod_args.conditioning_out, "Per-electrode dropout conditioning JSON");

    PlaceArgs place;
    auto* place_cmd = app.add_subcommand("place", "Rank every electrode placement by POD sensitivity");
    place_cmd->add_option("--slots", place.slots, "Candidate slots")->capture_default_str();
    place_cmd->add_option("--reference-slots", place.reference_slots,
                          "Slot ring the basis data was recorded on (evenly spaced electrodes)")
        ->capture_default_str();
    place_cmd->add_option("--select", place.select, "Electrodes to place")->capture_default_str();
    place_cmd->add_option("--modes", place.modes, "POD modes P")->capture_default_str();
    place_cmd->add_option("--mesh", place.mesh, "Mesh JSON (default: built-in disk)");
    place_cmd->add_option("--basis", place.basis, "Basis JSON")->required();
    place_cmd->add_option("--out", place.out, "Placement report JSON")->required();
    place_cmd->add_option("--score", place.score, "gram (mesh POD Gram) or data (data-space Gram)")
        ->capture_default_str();
    place_cmd->add_option("--threads", place.threads, "Worker threads (0: all cores)");

    ProjectArgs proj;
    auto* proj_cmd = app.add_subcommand("project", "Project frames with bad electrodes back to full length");
    proj_cmd->add_option("--basis", proj.basis, "Basis JSON")->required();
    proj_cmd->add_option("--bad", proj.bad, "Bad electrodes, comma separated, or 'auto'")->required();
    proj_cmd->add_option("--in", proj.in, "Frames CSV (full length or reduced)")->required();
    proj_cmd->add_option("--out", proj.out, "Projected frames CSV")->required();
    proj_cmd->add_flag("--regularized", proj.regularized, "Truncated pseudo-inverse for ill-conditioned bases");
    proj_cmd->add_option("--modes", proj.modes, "Use fewer than D' modes (least squares)");
    proj_cmd->add_flag("--independent", proj.independent, "One mode per Onsager class of valid measurements");
    proj_cmd->add_option("--threshold", proj.threshold, "Condition number limit")->capture_default_str();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Compare projected frames with ground truth");
    eval_cmd->add_option("--truth", ev.truth, "Ground-truth frames CSV")->required();
    eval_cmd->add_option("--projected", ev.projected, "Projected frames CSV")->required();
    eval_cmd->add_option("--observed", ev.observed, "Frames fed to project, for the zero-fill baseline");
    eval_cmd->add_option("--out", ev.out, "Report JSON output");

    RenderArgs rend;
    auto* render_cmd = app.add_subcommand("render", "Render mesh projections of POD modes as SVG");
    render_cmd->add_option("--basis", rend.basis, "Basis JSON")->required();
    render_cmd->add_option("--jacobian", rend.jacobian, "Reference Jacobian binary")->required();
    render_cmd->add_option("--mesh", rend.mesh, "Mesh JSON (default: built-in disk)");
    render_cmd->add_option("--modes", rend.modes, "1-based modes, comma separated")->capture_default_str();
    render_cmd->add_option("--size", rend.size, "Panel size in pixels")->capture_default_str();
    render_cmd->add_option("--range", rend.range, "Shared colour range (default: max |value|)");
    render_cmd->add_option("--out", rend.out, "SVG output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*mesh_cmd) run_mesh(mesh_args);
        else if (*sim_cmd) run_simulate(sim);
        else if (*pod_cmd) run_pod(pod_args);
        else if (*place_cmd) run_place(place);
        else if (*proj_cmd) run_project(proj);
        else if (*eval_cmd) run_eval(ev);
        else if (*render_cmd) run_render(rend);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
