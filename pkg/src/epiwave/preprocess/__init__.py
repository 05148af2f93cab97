"""Raw records to daily web-search/mobility graphs."""
from .districts import GridDistrictMap, PolygonDistrictMap, load_district_map, save_district_map
from .homes import estimate_home, estimate_homes, filter_permanent_users
from .pipeline import PreprocessConfig, PreprocessResult, assemble_series, preprocess_dirs, run_preprocess
from .search import SYMPTOMS, Lexicon, count_symptom_queries
from .trips import Stay, count_trips, count_trips_for_day, extract_stays, stay_table

__all__ = [
    "GridDistrictMap", "PolygonDistrictMap", "load_district_map", "save_district_map",
    "estimate_home", "estimate_homes", "filter_permanent_users",
    "PreprocessConfig", "PreprocessResult", "assemble_series", "preprocess_dirs", "run_preprocess",
    "SYMPTOMS", "Lexicon", "count_symptom_queries",
    "Stay", "count_trips", "count_trips_for_day", "extract_stays", "stay_table",
]
