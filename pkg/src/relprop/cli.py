"""Command-line interface.

Subcommands: ``fv-train`` (fit the Fisher-vector pipeline on a directory of
class-labelled images), ``explain`` (produce a heatmap for one image under a
loaded model), ``render`` (turn a saved relevance map into images) and
``diag`` (inspect models, scores and per-stage relevance sums). The
``RELPROP_LOG`` environment variable selects error/info/debug logging.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .datasets import write_quadrant_dataset
from .errors import FormatError
from .fisher import encode_fv, normalize_fv
from .fv_lrp import explain_fv, format_diagnostics
from .fvmodel import FvPipelineModel, load_fv_model, save_fv_model
from .gmm import DiagonalGmm
from .heatmap import grayscale_to_rgb, overlay_alpha, render
from .imageio import load_grayscale, read_ppm, write_pam_rgba, write_ppm
from .lrp import CutoffConfig, RuleConfig, explain_nn
from .model import load_model
from .pca import PcaReducer
from .serialize import read_magic, read_relevance_map, write_relevance_map
from .sift import descriptor_matrix, extract_dense_sift
from .svm import OneVsRestHinge

logger = logging.getLogger("relprop.cli")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    chosen = os.environ.get("RELPROP_LOG", "error").lower()
    level = LOG_LEVELS.get(chosen)
    if level is None:
        level = logging.ERROR
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    if chosen not in LOG_LEVELS:
        logger.error("unknown RELPROP_LOG value %r; using 'error'", chosen)


def _parse_sizes(text):
    try:
        sizes = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("size list is empty")
    return sizes


def _parse_cutoff(text):
    if text == "none":
        return ("none", None)
    if text == "receptive-field":
        return ("receptive-field", None)
    if text.startswith("layer:"):
        try:
            return ("layer", int(text[len("layer:") :]))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"bad cutoff {text!r}; expected layer:<index>"
            ) from None
    raise argparse.ArgumentTypeError(
        f"bad cutoff {text!r}; expected none, layer:<k> or receptive-field"
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="relprop",
        description="Relevance-propagation heatmaps for neural-network and "
        "Fisher-vector classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("fv-train", help="fit the Fisher-vector pipeline")
    train.add_argument("dataset", help="directory with one subdirectory per class")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--seed", type=int, required=True, help="training seed")
    train.add_argument("--sizes", type=_parse_sizes, default=[16, 24, 32],
                       help="comma-separated descriptor side lengths")
    train.add_argument("--stride", type=int, default=8)
    train.add_argument("--components", type=int, default=8, help="GMM components")
    train.add_argument("--pca-dim", type=int, default=80)
    train.add_argument("--lam", type=float, default=1e-4,
                       help="hinge-loss L2 regularization")
    train.add_argument("--epochs", type=int, default=50)
    train.add_argument("--no-normalize", action="store_true",
                       help="skip signed-sqrt / L2 normalization of Fisher vectors")

    explain = sub.add_parser("explain", help="explain one image under a model")
    explain.add_argument("--model", required=True)
    explain.add_argument("--image", required=True)
    explain.add_argument("--class", dest="target_class", required=True)
    explain.add_argument("--rule", choices=["basic", "epsilon", "alphabeta", "flat", "w2"])
    explain.add_argument("--epsilon", type=float)
    explain.add_argument("--alpha", type=float)
    explain.add_argument("--beta", type=float)
    explain.add_argument("--cutoff", type=_parse_cutoff, default=("none", None))
    explain.add_argument("--mode", choices=["fine", "coarse"])
    explain.add_argument("--out", help="heatmap PPM path")
    explain.add_argument("--overlay", help="alpha-overlay PAM path")
    explain.add_argument("--map", dest="map_out", help="raw relevance map path")
    explain.add_argument("--seed", type=int, help="accepted for uniformity; unused")

    rend = sub.add_parser("render", help="render a saved relevance map")
    rend.add_argument("--map", dest="map_in", required=True)
    rend.add_argument("--out", help="heatmap PPM path")
    rend.add_argument("--image", help="base image for --overlay")
    rend.add_argument("--overlay", help="alpha-overlay PAM path")

    diag = sub.add_parser("diag", help="inspect a model or an explanation")
    diag.add_argument("--model", required=True)
    diag.add_argument("--image")
    diag.add_argument("--class", dest="target_class")
    diag.add_argument("--rule", choices=["basic", "epsilon", "alphabeta", "flat", "w2"])
    diag.add_argument("--epsilon", type=float)
    diag.add_argument("--alpha", type=float)
    diag.add_argument("--beta", type=float)
    diag.add_argument("--cutoff", type=_parse_cutoff, default=("none", None))
    diag.add_argument("--mode", choices=["fine", "coarse"])
    return parser


# -- fv-train ------------------------------------------------------------


def _load_dataset(root):
    if not os.path.isdir(root):
        raise ValueError(f"dataset directory {root!r} does not exist")
    classes = sorted(
        name for name in os.listdir(root) if os.path.isdir(os.path.join(root, name))
    )
    if not classes:
        raise ValueError(f"no classes found under {root!r}")
    images, labels = [], []
    for name in classes:
        class_dir = os.path.join(root, name)
        count = 0
        for filename in sorted(os.listdir(class_dir)):
            path = os.path.join(class_dir, filename)
            if not os.path.isfile(path):
                continue
            try:
                images.append(load_grayscale(path))
            except (FormatError, OSError) as exc:
                logger.warning("skipping unreadable image %s: %s", path, exc)
                continue
            labels.append(name)
            count += 1
        logger.info("class %s: %d image(s)", name, count)
    represented = sorted(set(labels))
    if len(represented) < 2:
        raise ValueError(
            f"need at least 2 classes with readable images, found {len(represented)}"
        )
    return images, labels, represented


def cmd_fv_train(args):
    images, labels, classes = _load_dataset(args.dataset)
    per_image = []
    for image in images:
        descriptors = extract_dense_sift(image, sizes=args.sizes, stride=args.stride)
        per_image.append(descriptor_matrix(descriptors))
    stacked = np.concatenate([m for m in per_image if len(m)], axis=0)
    logger.info("extracted %d descriptors from %d images", len(stacked), len(images))

    pca = PcaReducer(n_components=args.pca_dim).fit(stacked)
    reduced_all = pca.transform(stacked)
    gmm = DiagonalGmm(n_components=args.components, random_state=args.seed).fit(
        reduced_all
    )
    logger.info(
        "GMM converged after %d EM iteration(s)", len(gmm.log_likelihood_path_)
    )

    normalize = not args.no_normalize
    fvs = []
    for matrix in per_image:
        if not len(matrix):
            raise ValueError("an image produced no descriptors; lower --sizes")
        fv = encode_fv(gmm, pca.transform(matrix))
        fvs.append(normalize_fv(fv) if normalize else fv)
    fvs = np.stack(fvs)
    label_array = np.asarray(labels)

    clf = OneVsRestHinge(
        lam=args.lam, n_epochs=args.epochs, random_state=args.seed
    ).fit(fvs, label_array)
    predicted = clf.predict(fvs)
    for name in classes:
        mask = label_array == name
        accuracy = float(np.mean(predicted[mask] == name))
        print(f"class {name} accuracy {accuracy:.4f}")
    overall = float(np.mean(predicted == label_array))
    print(f"overall accuracy {overall:.4f}")

    model = FvPipelineModel(
        sizes=args.sizes,
        stride=args.stride,
        pca=pca,
        gmm=gmm,
        normalize=normalize,
        class_names=list(clf.classes_),
        weights=clf.coef_,
        biases=clf.intercept_,
    )
    save_fv_model(model, args.out)
    print(f"model written to {args.out}")
    return 0


# -- explain -------------------------------------------------------------


def _nn_rule_config(args):
    rule = args.rule if args.rule else "alphabeta"
    if args.epsilon is not None and rule != "epsilon":
        raise ValueError("--epsilon only applies with --rule epsilon")
    if (args.alpha is not None or args.beta is not None) and rule != "alphabeta":
        raise ValueError("--alpha/--beta only apply with --rule alphabeta")
    config = RuleConfig(rule=rule)
    if args.epsilon is not None:
        config.epsilon = args.epsilon
    if args.alpha is not None:
        config.alpha = args.alpha
    if args.beta is not None:
        config.beta = args.beta
    return config.validate()


def _nn_cutoff_config(args, n_layers):
    kind, value = args.cutoff
    if kind == "none":
        return CutoffConfig()
    if kind == "layer":
        return CutoffConfig(value).validate(n_layers)
    # receptive-field: only the input-adjacent mapping redistributes flatly.
    return CutoffConfig(1).validate(n_layers)


def _shape_input(image, input_shape):
    if image.shape == input_shape:
        return image
    if tuple(input_shape) == (1,) + image.shape:
        return image[None]
    if len(input_shape) == 1 and image.size == input_shape[0]:
        return image.ravel()
    raise ValueError(
        f"image shape {image.shape} does not fit model input shape {tuple(input_shape)}"
    )


def _fv_mode_epsilon(args):
    kind, _ = args.cutoff
    mode = args.mode
    if kind == "layer":
        raise ValueError(
            "layer cut-offs apply to network models; for the Fisher-vector "
            "pipeline use --cutoff receptive-field or --mode coarse"
        )
    if kind == "receptive-field":
        if mode == "fine":
            raise ValueError("--cutoff receptive-field conflicts with --mode fine")
        mode = "coarse"
    if mode is None:
        mode = "fine"
    if args.rule not in (None, "basic", "epsilon"):
        raise ValueError(
            "the Fisher-vector decomposition supports --rule basic or epsilon only"
        )
    if args.rule == "basic":
        if args.epsilon not in (None, 0.0):
            raise ValueError("--epsilon only applies with --rule epsilon")
        epsilon = 0.0
    else:
        epsilon = 100.0 if args.epsilon is None else args.epsilon
    return mode, epsilon


def _explain_any(args):
    """Shared by explain and diag: run the explanation, return its pieces."""
    magic = read_magic(args.model)
    image = load_grayscale(args.image)
    if magic == "RELPROP-MODEL v1":
        model = load_model(args.model)
        rules = _nn_rule_config(args)
        cutoff = _nn_cutoff_config(args, len(model.layers))
        net_input = _shape_input(image, model.input_shape)
        scores, trace = model.forward(net_input)
        target = int(args.target_class)
        result = explain_nn(model, trace, target, rules=rules, cutoff=cutoff)
        pixel_map = result.pixel_map
        kind_token, cut_value = args.cutoff
        cutoff_text = f"layer:{cut_value}" if kind_token == "layer" else kind_token
        lines = [
            "kind neural-network",
            f"rule {rules.rule}",
            f"cutoff {cutoff_text}",
            f"target_class {target}",
            f"score {float(np.ravel(scores)[target])!r}",
        ]
        for index, total in enumerate(result.layer_sums()):
            lines.append(f"layer_sum {index} {total!r}")
        lines.append(f"pixel_sum {float(pixel_map.sum())!r}")
        report = "\n".join(lines) + "\n"
        return pixel_map, report, image
    if magic == "RELPROP-FVMODEL v1":
        model = load_fv_model(args.model)
        mode, epsilon = _fv_mode_epsilon(args)
        result, diagnostics = explain_fv(
            image, model, args.target_class, mode=mode, epsilon=epsilon
        )
        report = "kind fisher-vector\n" + format_diagnostics(diagnostics)
        return result.values, report, image
    raise FormatError(
        f"{args.model}: unrecognized model header {magic!r}; expected "
        "RELPROP-MODEL v1 or RELPROP-FVMODEL v1"
    )


def cmd_explain(args):
    pixel_map, report, image = _explain_any(args)
    sys.stdout.write(report)
    if args.out:
        write_ppm(render(pixel_map), args.out)
        logger.info("heatmap written to %s", args.out)
    if args.overlay:
        base = grayscale_to_rgb(image)
        write_pam_rgba(overlay_alpha(base, pixel_map), args.overlay)
        logger.info("overlay written to %s", args.overlay)
    if args.map_out:
        mode = report.split("mode ", 1)[1].split()[0] if "mode " in report else "none"
        write_relevance_map(pixel_map, args.map_out, mode=mode)
        logger.info("relevance map written to %s", args.map_out)
    return 0


def cmd_render(args):
    values, _ = read_relevance_map(args.map_in)
    if not args.out and not args.overlay:
        raise ValueError("nothing to do: pass --out and/or --overlay")
    if args.out:
        write_ppm(render(values), args.out)
    if args.overlay:
        if not args.image:
            raise ValueError("--overlay needs --image for the base pixels")
        with open(args.image, "rb") as fh:
            magic = fh.read(2)
        if magic == b"P6":
            base = read_ppm(args.image)
        else:
            base = grayscale_to_rgb(load_grayscale(args.image))
        write_pam_rgba(overlay_alpha(base, values), args.overlay)
    return 0


def cmd_diag(args):
    magic = read_magic(args.model)
    if magic == "RELPROP-MODEL v1":
        model = load_model(args.model)
        print("kind neural-network")
        print("input_shape", *model.input_shape)
        print("layers", len(model.layers))
        for index, layer in enumerate(model.layers):
            detail = ""
            if layer.kind == "Dense":
                detail = f" in {layer.n_in} out {layer.n_out}"
            elif layer.kind == "Conv2d":
                detail = (
                    f" kernel {'x'.join(str(d) for d in layer.kernel.shape)}"
                    f" stride {layer.stride} padding {layer.padding}"
                )
            elif layer.kind in ("SumPool2d", "MaxPool2d"):
                detail = (
                    f" window {layer.window} stride {layer.stride}"
                    f" padding {layer.padding}"
                )
            print(f"layer {index} {layer.kind}{detail}")
        if args.image and args.target_class is None:
            image = load_grayscale(args.image)
            scores, _ = model.forward(_shape_input(image, model.input_shape))
            for index, value in enumerate(np.ravel(scores)):
                print(f"score {index} {float(value)!r}")
    elif magic == "RELPROP-FVMODEL v1":
        model = load_fv_model(args.model)
        print("kind fisher-vector")
        print("classes", *model.class_names)
        print("components", model.gmm.weights_.shape[0])
        print("reduced_dim", model.gmm.means_.shape[1])
        print("sizes", *model.sizes)
        print("stride", model.stride)
        print("normalize", int(model.normalize))
        if args.image and args.target_class is None:
            scores = model.predict_scores(load_grayscale(args.image))
            for name, value in zip(model.class_names, scores):
                print(f"score {name} {float(value)!r}")
    else:
        raise FormatError(f"{args.model}: unrecognized model header {magic!r}")
    if args.image and args.target_class is not None:
        _, report, _ = _explain_any(args)
        sys.stdout.write(report)
    return 0


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fv-train": cmd_fv_train,
        "explain": cmd_explain,
        "render": cmd_render,
        "diag": cmd_diag,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # surface everything as a clean nonzero exit
        logger.debug("failure detail", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def generate_dataset_main(argv=None):
    """Helper entry point to materialize the synthetic quadrant dataset."""
    parser = argparse.ArgumentParser(prog="relprop-make-dataset")
    parser.add_argument("root")
    parser.add_argument("--per-class", type=int, default=16)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, required=True)
    args = parser.parse_args(argv)
    write_quadrant_dataset(args.root, args.per_class, size=args.size, seed=args.seed)
    print(f"dataset written to {args.root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
