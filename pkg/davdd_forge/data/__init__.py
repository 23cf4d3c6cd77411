"""
Veri üretimi, kalıcılık ve çekirdek küme seçimi modülü
"""

# Veri sınıflarını daha kolay import edilebilir hale getir
from .benchmark import BenchmarkSpec, generate_benchmark, split_train_test
from .dataset import PairedDataset, batch_iter, load_dataset, pairing_checksum, save_dataset
from .selection import flatten_selection, herding_select, random_select
