"""
Dağılım eşleme kayıpları: özel (modalite içi) ve ortak (modaliteler arası)
"""

from ..exceptions import ContractError


def _squared_distance(u, v):
    diff = u - v
    return (diff * diff).sum()


def _check_nonempty(reps_real, reps_syn):
    if len(reps_real) == 0 or len(reps_syn) == 0:
        raise ContractError(f"Eşleme boş yığın alamaz: gerçek={len(reps_real)}, sentetik={len(reps_syn)}")


def loss_private(reps_real, reps_syn):
    """
    L_pr = ||ort(z_p^A,gerçek) - ort(z_p^A,sentetik)||² + ||ort(z_p^V,gerçek) - ort(z_p^V,sentetik)||²

    Ses terimi yalnızca ses tuvallerine, görüntü terimi yalnızca görüntü
    tuvallerine bağlıdır.
    """
    _check_nonempty(reps_real, reps_syn)
    audio_term = _squared_distance(reps_real.audio_private.mean(axis=0), reps_syn.audio_private.mean(axis=0))
    visual_term = _squared_distance(reps_real.visual_private.mean(axis=0), reps_syn.visual_private.mean(axis=0))
    return audio_term + visual_term


def loss_common(reps_real, reps_syn, joint=True):
    """
    L_com = L^A_com + L^V_com (+ L^AV_com)

    Args:
        reps_real (Reps): Gerçek yığın temsilleri
        reps_syn (Reps): Sentetik yığın temsilleri
        joint (bool): Ortalamaların toplamı üzerindeki ortak terimi ekle
    """
    _check_nonempty(reps_real, reps_syn)
    real_a = reps_real.audio_common.mean(axis=0)
    real_v = reps_real.visual_common.mean(axis=0)
    syn_a = reps_syn.audio_common.mean(axis=0)
    syn_v = reps_syn.visual_common.mean(axis=0)
    loss = _squared_distance(real_a, syn_a) + _squared_distance(real_v, syn_v)
    if joint:
        loss = loss + _squared_distance(real_a + real_v, syn_a + syn_v)
    return loss
