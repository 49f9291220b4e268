"""City layout, shape-grammar expansion and the semantic city model."""
from .cga import LotResult, ShapeNode, run_lot, single_lot_layout
from .city import Building, CityObject, Entrance, SemanticCity, Zone, finalize_city, generate_city, write_obj
from .layout import Layout, LayoutConfig, Lot, generate_layout, read_layout
from .scope import Scope

__all__ = ["LotResult", "ShapeNode", "run_lot", "single_lot_layout", "Building", "CityObject", "Entrance",
           "SemanticCity", "Zone", "finalize_city", "generate_city", "write_obj", "Layout", "LayoutConfig",
           "Lot", "generate_layout", "read_layout", "Scope"]
