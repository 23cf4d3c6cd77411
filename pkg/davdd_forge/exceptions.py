"""
Motor genelinde kullanılan hata sınıfları
"""


class ForgeError(ValueError):
    """
    Tüm motor hatalarının temel sınıfı
    """


class ShapeError(ForgeError):
    """
    Boyut veya eksen uyuşmazlığı (mesaj her iki şekli de içerir)
    """


class ContractError(ForgeError):
    """
    Bir işlemin ön koşulu sağlanmadı
    """


class ConfigError(ForgeError):
    """
    Geçersiz yapılandırma
    """


class NonFiniteError(ForgeError):
    """
    İleri hesaplama NaN veya sonsuz değer üretti
    """


class ArtifactError(ForgeError):
    """
    Eksik ya da bozuk yukarı akış çıktısı
    """

    def __init__(self, path, reason="bulunamadı"):
        self.path = str(path)
        super().__init__(f"Çıktı {reason}: {self.path}")
