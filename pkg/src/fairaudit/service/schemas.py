from typing import Literal, Optional, Union

from pydantic import BaseModel


class QueryRequest(BaseModel):
    # an example id for finite models, a point for linear ones
    x: Union[int, list[float]]


class QueryResponse(BaseModel):
    label: Literal[1, -1]


class MetaResponse(BaseModel):
    kind: Literal["finite", "linear"]
    m: Optional[int] = None
    d: Optional[int] = None


class StatsResponse(BaseModel):
    queries: int
