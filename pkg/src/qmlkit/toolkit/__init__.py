from .datasets import load_csv, make_classification, make_moons, save_csv, train_test_split
from .model_selection import GridSearchResult, expand_grid, grid_search_cv, kfold, stratified_kfold
from .pipeline import Pipeline, is_classification
from .preprocessing import MinMaxScaler, SelectKBest, f_classif

__all__ = [
    "load_csv", "make_classification", "make_moons", "save_csv", "train_test_split", "GridSearchResult",
    "expand_grid", "grid_search_cv", "kfold", "stratified_kfold", "Pipeline", "is_classification",
    "MinMaxScaler", "SelectKBest", "f_classif",
]
