"""
davdd_forge komut satırı giriş noktası
"""

import argparse
import logging
import os
import sys

from . import pipeline
from .config import LOG_DIR, LOG_LEVEL, LOG_TO_FILE, RunConfig
from .exceptions import ForgeError

logger = logging.getLogger(__name__)


def setup_logging(level=LOG_LEVEL):
    """
    Loglama yapılandırması (yalnızca CLI başlangıcında bir kez)
    """
    handlers = [logging.StreamHandler()]
    if LOG_TO_FILE:
        os.makedirs(LOG_DIR, exist_ok=True)
        handlers.insert(0, logging.FileHandler(os.path.join(LOG_DIR, 'davdd_forge.log'), encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON yapılandırma dosyası (bayraklar dosyadaki değerleri ezer)")
    common.add_argument("--out", type=str, help="Çıktı dizini")
    common.add_argument("--seed", type=int, help="Ana tohum")
    common.add_argument("--jobs", type=int, help="Paralel iş sayısı (DAVDD_FORGE_THREADS ile sınırlı)")
    common.add_argument("--log-level", type=str, default=None, help="Log seviyesi")
    return common


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="davdd_forge", description="Ayrıştırılmış ses-görüntü veri kümesi damıtma motoru"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Sentetik benchmark üret")
    gen.add_argument("--spec", type=str, help="BenchmarkSpec JSON dosyası")
    gen.add_argument("--classes", type=int, dest="num_classes", help="Sınıf sayısı")
    gen.add_argument("--per-class", type=int, dest="samples_per_class", help="Sınıf başına örnek")
    gen.add_argument("--noise", type=float, help="Gözlem gürültüsü")
    gen.add_argument("--data-seed", type=int, help="Veri tohumu")

    pretrain = sub.add_parser("pretrain", parents=[common], help="Ön eğitilmiş bankayı oluştur")
    pretrain.add_argument("--data", type=str, required=True, help="gen çıktısı")
    pretrain.add_argument("--pairs", type=int, dest="num_pairs", help="M")
    pretrain.add_argument("--epochs", type=int, dest="pretrain_epochs", help="Çift başına dönem")
    pretrain.add_argument("--arch", type=str, dest="architecture", choices=["convnet", "mlp"], help="Kodlayıcı mimarisi")

    decouple = sub.add_parser("decouple", parents=[common], help="Ayrıştırıcı bankasını eğit")
    decouple.add_argument("--data", type=str, required=True, help="gen çıktısı")
    decouple.add_argument("--bank", type=str, required=True, help="pretrain çıktısı")
    decouple.add_argument("--decouplers", type=int, dest="num_decouplers", help="T")
    decouple.add_argument("--common-dim", type=int, help="d_c")
    decouple.add_argument("--depth", type=int, dest="decoupler_depth", choices=[1, 2], help="Ayrıştırıcı derinliği")
    decouple.add_argument("--epochs", type=int, dest="decouple_epochs", help="Dönem sayısı")
    decouple.add_argument("--tau", type=float, dest="temperature", help="Sıcaklık")
    decouple.add_argument("--lambda-com", type=float, help="λ_com")
    decouple.add_argument("--lambda-fu", type=float, help="λ_fu")
    decouple.add_argument("--lambda-inter", type=float, help="λ_inter")
    decouple.add_argument("--lambda-intra", type=float, help="λ_intra")
    decouple.add_argument("--lambda-align", type=float, help="λ_align")

    distill = sub.add_parser("distill", parents=[common], help="Sentetik kümeyi damıt")
    distill.add_argument("--data", type=str, required=True, help="gen çıktısı")
    distill.add_argument("--bank", type=str, help="decouple (ya da yalnızca özel eşleme için pretrain) çıktısı")
    distill.add_argument("--ipc", type=int, help="Sınıf başına tuval")
    distill.add_argument("--factor", type=int, help="Faktör tekniği parametresi l")
    distill.add_argument("--steps", type=int, help="Damıtma adımı (0 = yalnızca çekirdek küme)")
    distill.add_argument("--method", type=str, dest="init_method", choices=["herding", "random"], help="Başlatma yöntemi")
    distill.add_argument("--lambda-c", type=float, help="λ_c (0 = yalnızca özel eşleme)")
    distill.add_argument("--lambda-p", type=float, help="λ_p")
    distill.add_argument("--lr-syn", type=float, help="Tuval öğrenme oranı")
    distill.add_argument("--batch-size", type=int, help="Sınıf başına gerçek yığın")
    distill.add_argument("--no-joint-common", dest="joint_common", action="store_const", const=False,
                         help="Ortak eşlemede AV birleşik terimini kapat")
    distill.add_argument("--global-matching", dest="per_class_matching", action="store_const", const=False,
                         help="Sınıf içi yerine küme genelinde eşle")
    distill.add_argument("--encoders", type=str, choices=["bank", "random"], default="bank",
                         help="Ön eğitilmiş banka ya da her adımda rastgele kodlayıcılar")
    distill.add_argument("--no-decoupler", action="store_true", help="Ayrıştırıcı bankasını kullanma")

    evaluate = sub.add_parser("eval", parents=[common], help="Değerlendirme protokolünü çalıştır")
    evaluate.add_argument("--data", type=str, required=True, help="gen çıktısı")
    evaluate.add_argument("--distilled", type=str, help="distill çıktısı")
    evaluate.add_argument("--whole", action="store_true", help="Tüm gerçek eğitim kümesiyle eğit")
    evaluate.add_argument("--runs", type=int, dest="eval_runs", help="Bağımsız çalıştırma sayısı")
    evaluate.add_argument("--epochs", type=int, dest="downstream_epochs", help="Alt görev dönem sayısı")
    evaluate.add_argument("--eval-arch", type=str, choices=["convnet", "mlp"], help="Değerlendirme kodlayıcı mimarisi")

    ablate = sub.add_parser("ablate", parents=[common], help="Dört satırlı ablasyonu çalıştır")
    ablate.add_argument("--data", type=str, required=True, help="gen çıktısı")
    ablate.add_argument("--bank", type=str, required=True, help="decouple çıktısı")
    ablate.add_argument("--ipc", type=int, help="Sınıf başına tuval")
    ablate.add_argument("--steps", type=int, help="Damıtma adımı")
    ablate.add_argument("--runs", type=int, dest="eval_runs", help="Satır başına çalıştırma")
    ablate.add_argument("--epochs", type=int, dest="downstream_epochs", help="Alt görev dönem sayısı")

    export = sub.add_parser("export-embeddings", parents=[common], help="z_p ve z_c temsillerini dışa aktar")
    export.add_argument("--data", type=str, required=True, help="gen çıktısı")
    export.add_argument("--bank", type=str, required=True, help="decouple çıktısı")
    export.add_argument("--split", type=str, choices=["train", "test"], default="test", help="Bölüm")
    export.add_argument("--pair", type=int, default=0, help="Çift indeksi m")
    export.add_argument("--slot", type=int, default=0, help="Ayrıştırıcı indeksi t")
    return parser


def resolve_config(args):
    """
    Dosya değerleri + bayraklar -> RunConfig

    --out verilmezse çıktı OUTPUT_DIR/<komut> olur.
    """
    base = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in vars(args).items() if k not in ('config', 'command')}
    cfg = base.merged(overrides)
    if not args.out:
        cfg = cfg.merged({'out': os.path.join(base.out, args.command)})
    cfg.validate()
    return cfg


def run_command(args):
    cfg = resolve_config(args)
    command = args.command
    if command == 'gen':
        return pipeline.cmd_gen(cfg, args.spec)
    if command == 'pretrain':
        return pipeline.cmd_pretrain(cfg, args.data)
    if command == 'decouple':
        return pipeline.cmd_decouple(cfg, args.data, args.bank)
    if command == 'distill':
        return pipeline.cmd_distill(
            cfg, args.data, args.bank, encoder_source=args.encoders, use_decoupler=not args.no_decoupler
        )
    if command == 'eval':
        return pipeline.cmd_eval(cfg, args.data, args.distilled, whole=args.whole, eval_arch=args.eval_arch)
    if command == 'ablate':
        return pipeline.cmd_ablate(cfg, args.data, args.bank)
    return pipeline.cmd_export_embeddings(cfg, args.data, args.bank, args.split, args.pair, args.slot)


def main(argv=None):
    """
    Ana fonksiyon

    Returns:
        int: Çıkış kodu (0 başarı, 2 motor hatası, 1 beklenmeyen hata)
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level or LOG_LEVEL)
    try:
        run_command(args)
    except ForgeError as e:
        logger.error(f"{args.command} başarısız: {e}")
        print(f"hata: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"{args.command} beklenmeyen hata: {str(e)}")
        print(f"beklenmeyen hata: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
