#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "dicti/dataset.hpp"
#include "dicti/harness.hpp"
#include "dicti/pipeline.hpp"
#include "dicti/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dicti;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNoSubject = 3;
constexpr int kExitPartial = 4;

std::vector<std::string> split_command(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string part; in >> part;) out.push_back(part);
    return out;
}

std::unique_ptr<LabelProvider> make_parser(const std::vector<std::string>& command) {
    if (command.empty()) return std::make_unique<PrecomputedLabels>();
    return std::make_unique<ExternalParser>(command);
}

struct EditArgs {
    std::string image, labels, prompt, backend = "stub", backend_config, parser, out;
    MaskGenConfig masks;
    SynthesisParams synthesis;
    int working_size = 0;
    bool no_intermediates = false;
};

int cmd_edit(const EditArgs& a) {
    EditJobSpec spec;
    spec.image = a.image;
    if (!a.labels.empty()) spec.labels = fs::path(a.labels);
    spec.prompt = a.prompt;
    spec.masks = a.masks;
    spec.synthesis = a.synthesis;
    spec.backend = a.backend;
    spec.output_dir = a.out;
    spec.working_size = a.working_size;
    spec.persist_intermediates = !a.no_intermediates;
    if (!spec.labels && a.parser.empty()) {
        throw ContractViolation("labels: pass --labels or --parser");
    }
    auto parser = make_parser(split_command(a.parser));
    auto backend = make_backend(a.backend, a.backend_config);
    const EditResult result = run_edit(spec, *parser, *backend);
    std::cout << "mask_inpaint_px=" << result.masks.inpaint.count()
              << " mask_head_px=" << result.masks.head.count() << '\n';
    for (std::size_t v = 0; v < result.edited.size(); ++v) {
        std::cout << (fs::path(a.out) / ("edited_" + std::to_string(v) + ".png")).string() << '\n';
    }
    return 0;
}

// Paths inside a config file are resolved against the file's directory.
fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<std::string> prompts_from(const json& j, const fs::path& base) {
    if (j.is_array()) return j.get<std::vector<std::string>>();
    return load_prompts(resolve(base, j.get<std::string>()));
}

int cmd_ablate(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    const json cfg = json::parse(in, nullptr, true, true);
    const fs::path base = fs::absolute(config_path).parent_path();

    IngestOptions ingest_opts;
    ingest_opts.square_crop = cfg.value("square_crop", false);
    ingest_opts.limit = cfg.value("limit", std::size_t{0});

    AblationGrid grid;
    grid.images = ingest(cfg.at("dataset").get<std::string>(), resolve(base, cfg.at("root").get<std::string>()),
                         ingest_opts);
    grid.d_values = cfg.value("d_values", std::vector<int>{0, 30, 50, 70, 90, 110});
    grid.prompts = prompts_from(cfg.at("prompts"), base);
    grid.variations = cfg.value("variations", 5);
    grid.e = cfg.value("e", 10);
    grid.f = cfg.value("f", 5);
    grid.base_seed = cfg.value("seed", std::uint64_t{0});
    grid.validate();

    BatchOptions opts;
    if (cfg.contains("body_labels")) opts.masks.body_labels = LabelSet::from_vector(cfg["body_labels"]);
    if (cfg.contains("preserved_labels")) {
        opts.masks.preserved_labels = LabelSet::from_vector(cfg["preserved_labels"]);
    }
    if (cfg.contains("head_labels")) opts.masks.head_labels = LabelSet::from_vector(cfg["head_labels"]);
    opts.synthesis.seed = grid.base_seed;
    opts.synthesis.steps = cfg.value("steps", opts.synthesis.steps);
    opts.synthesis.guidance_scale = cfg.value("guidance_scale", opts.synthesis.guidance_scale);
    opts.synthesis.variations = grid.variations;
    if (cfg.contains("kid")) {
        const json& k = cfg["kid"];
        opts.kid.subset_size = k.value("subset_size", opts.kid.subset_size);
        opts.kid.n_subsets = k.value("n_subsets", opts.kid.n_subsets);
        opts.kid.rng_seed = k.value("rng_seed", opts.kid.rng_seed);
    }
    opts.output_dir = resolve(base, cfg.value("out", std::string("runs/ablation")));
    opts.persist_intermediates = cfg.value("persist_intermediates", true);
    opts.working_size = cfg.value("working_size", 0);
    opts.workers = cfg.value("workers", 2u);

    const std::string backend_config = cfg.value("backend_config", std::string());
    auto backend = make_backend(cfg.value("backend", std::string("stub")),
                                backend_config.empty() ? fs::path() : resolve(base, backend_config));
    BackendWorker worker(backend);
    auto extractor = make_extractor(cfg.value("extractor", std::string("color-stats")));
    auto parser = make_parser(cfg.value("parser", std::vector<std::string>{}));

    const AblationReport report = run_ablation(grid, *parser, worker, *extractor, opts);
    for (const auto& s : report.summaries) {
        std::cout << "d=" << s.d << " n_images=" << s.n_images << " n_failed=" << s.n_failed
                  << " kid_mean=" << (s.kid_mean ? std::to_string(*s.kid_mean) : std::string("-"))
                  << " clip_s=" << s.clip_s_mean << " clip_iqa=" << s.clip_iqa_mean
                  << " mask_area_mean_px=" << s.mask_area_mean << '\n';
    }
    std::cout << "report: " << opts.output_dir.string() << '\n';
    if (report.failures() > 0) {
        std::cerr << report.failures() << " generation(s) failed; see per_image.csv\n";
        return kExitPartial;
    }
    return 0;
}

struct EvalArgs {
    std::string dataset, root, prompts, backend = "stub", backend_config, out, extractor = "color-stats", parser;
    bool square_crop = false;
    std::size_t limit = 0;
    MaskGenConfig masks;
    SynthesisParams synthesis;
    KidParams kid;
    int working_size = 0;
    unsigned workers = 2;
};

int cmd_eval(EvalArgs a) {
    const DatasetManifest manifest = ingest(a.dataset, a.root, IngestOptions{a.square_crop, a.limit});
    const auto prompts = load_prompts(a.prompts);
    BatchOptions opts;
    opts.masks = a.masks;
    opts.synthesis = a.synthesis;
    opts.kid = a.kid;
    opts.output_dir = a.out;
    opts.working_size = a.working_size;
    opts.workers = a.workers;

    BackendWorker worker(make_backend(a.backend, a.backend_config));
    auto extractor = make_extractor(a.extractor);
    auto parser = make_parser(split_command(a.parser));
    const EvalResult result = run_eval(manifest, prompts, *parser, worker, *extractor, opts);
    const auto& s = result.report;
    std::cout << "planned=" << result.planned << " scored=" << s.n_images << " failed=" << result.failures.size()
              << " kid_mean=" << s.kid_mean << " kid_std=" << s.kid_std << " clip_s=" << s.clip_s_mean
              << " clip_iqa=" << s.clip_iqa_mean << '\n';
    if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " generation(s) failed; see failures.csv\n";
        return kExitPartial;
    }
    return 0;
}

int cmd_ingest(const std::string& dataset, const std::string& root, bool square_crop, std::size_t limit) {
    std::cout << format_manifest(ingest(dataset, root, IngestOptions{square_crop, limit}));
    return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

struct ServeArgs {
    std::string listen = "127.0.0.1:8080";
    std::string data_dir = "data/service";
    std::string backend = "stub";
    std::string backend_config;
    std::string parser;
    std::string static_dir;
    std::size_t queue_depth = 64;
};

int cmd_serve(const ServeArgs& a) {
    const auto colon = a.listen.rfind(':');
    if (colon == std::string::npos) throw ContractViolation("listen: expected HOST:PORT");
    const std::string host = a.listen.substr(0, colon);
    const int port = std::stoi(a.listen.substr(colon + 1));

    ServiceConfig cfg;
    cfg.data_dir = a.data_dir;
    cfg.backend = a.backend;
    cfg.backend_config = a.backend_config;
    cfg.parser_command = split_command(a.parser);
    cfg.max_queue_depth = a.queue_depth;
    JobService service(cfg);

    httplib::Server server;
    install_routes(server, service,
                   a.static_dir.empty() ? std::nullopt : std::optional<fs::path>(a.static_dir));
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on http://" << host << ':' << port << " (backend " << service.backend_name()
              << ", data " << a.data_dir << ")" << std::endl;
    if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << a.listen << '\n';
        return kExitError;
    }
    return 0;
}

void add_mask_options(CLI::App* cmd, MaskGenConfig& m) {
    cmd->add_option("--d", m.d, "dilation radius for the body mask")->capture_default_str();
    cmd->add_option("--e", m.e, "erosion radius for preserved parts")->capture_default_str();
    cmd->add_option("--f", m.f, "erosion radius for the head mask")->capture_default_str();
}

void add_synthesis_options(CLI::App* cmd, SynthesisParams& s) {
    cmd->add_option("--seed", s.seed, "base seed")->capture_default_str();
    cmd->add_option("--steps", s.steps, "denoising steps")->capture_default_str();
    cmd->add_option("--guidance", s.guidance_scale, "classifier-free guidance scale")->capture_default_str();
    cmd->add_option("--variations", s.variations, "images per prompt")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dicti: text-guided garment editing"};
    app.require_subcommand(1);

    EditArgs edit;
    auto* edit_cmd = app.add_subcommand("edit", "edit one image");
    edit_cmd->add_option("--image", edit.image, "source image (PNG or JPEG)")->required()->check(CLI::ExistingFile);
    edit_cmd->add_option("--prompt", edit.prompt, "garment description")->required();
    edit_cmd->add_option("--labels", edit.labels, "body-part label map PNG")->check(CLI::ExistingFile);
    edit_cmd->add_option("--parser", edit.parser, "external parser command, run as CMD IMAGE LABELS");
    add_mask_options(edit_cmd, edit.masks);
    add_synthesis_options(edit_cmd, edit.synthesis);
    edit_cmd->add_option("--backend", edit.backend)->check(CLI::IsMember({"stub", "diffusion"}))->capture_default_str();
    edit_cmd->add_option("--backend-config", edit.backend_config, "JSON config for the diffusion backend");
    edit_cmd->add_option("--working-size", edit.working_size, "longer side used for processing; 0 = native");
    edit_cmd->add_flag("--no-intermediates", edit.no_intermediates, "write only the edited images");
    edit_cmd->add_option("--out", edit.out, "output directory")->required();

    std::string ablate_config;
    auto* ablate_cmd = app.add_subcommand("ablate", "sweep the dilation radius");
    ablate_cmd->add_option("--config", ablate_config, "ablation config (JSON)")->required()->check(CLI::ExistingFile);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "generate and score a dataset x prompt set");
    eval_cmd->add_option("--dataset", ev.dataset)->required()->check(CLI::IsMember({"viton", "fashionpedia"}));
    eval_cmd->add_option("--root", ev.root)->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--prompts", ev.prompts, "one prompt per line")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--backend", ev.backend)->check(CLI::IsMember({"stub", "diffusion"}))->capture_default_str();
    eval_cmd->add_option("--backend-config", ev.backend_config);
    eval_cmd->add_option("--out", ev.out)->required();
    eval_cmd->add_option("--extractor", ev.extractor, "color-stats or external:CMD")->capture_default_str();
    eval_cmd->add_option("--parser", ev.parser, "external parser for images without label maps");
    eval_cmd->add_flag("--square-crop", ev.square_crop, "keep the top square of each image");
    eval_cmd->add_option("--limit", ev.limit, "use only the first N images");
    eval_cmd->add_option("--kid-subset-size", ev.kid.subset_size)->capture_default_str();
    eval_cmd->add_option("--kid-subsets", ev.kid.n_subsets)->capture_default_str();
    eval_cmd->add_option("--kid-seed", ev.kid.rng_seed)->capture_default_str();
    eval_cmd->add_option("--working-size", ev.working_size);
    eval_cmd->add_option("--workers", ev.workers)->check(CLI::Range(1u, 64u))->capture_default_str();
    add_mask_options(eval_cmd, ev.masks);
    add_synthesis_options(eval_cmd, ev.synthesis);
    ev.synthesis.variations = 1;

    std::string ingest_dataset, ingest_root;
    bool ingest_crop = false;
    std::size_t ingest_limit = 0;
    auto* ingest_cmd = app.add_subcommand("ingest", "print a dataset manifest");
    ingest_cmd->add_option("--dataset", ingest_dataset)->required()->check(CLI::IsMember({"viton", "fashionpedia"}));
    ingest_cmd->add_option("--root", ingest_root)->required()->check(CLI::ExistingDirectory);
    ingest_cmd->add_flag("--square-crop", ingest_crop);
    ingest_cmd->add_option("--limit", ingest_limit);

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP job service");
    serve_cmd->add_option("--listen", serve.listen, "HOST:PORT")->capture_default_str();
    serve_cmd->add_option("--data-dir", serve.data_dir, "image store and job ledger")->capture_default_str();
    serve_cmd->add_option("--backend", serve.backend)->check(CLI::IsMember({"stub", "diffusion"}))->capture_default_str();
    serve_cmd->add_option("--backend-config", serve.backend_config);
    serve_cmd->add_option("--parser", serve.parser, "external parser for uploads without label maps");
    serve_cmd->add_option("--static", serve.static_dir, "directory served at /")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--queue-depth", serve.queue_depth)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*edit_cmd) return cmd_edit(edit);
        if (*ablate_cmd) return cmd_ablate(ablate_config);
        if (*eval_cmd) return cmd_eval(ev);
        if (*ingest_cmd) return cmd_ingest(ingest_dataset, ingest_root, ingest_crop, ingest_limit);
        if (*serve_cmd) return cmd_serve(serve);
    } catch (const NoSubjectError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoSubject;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
