"""Model server: answers label queries for one hidden model."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..errors import InvalidInput
from ..harness.oracles import CountingOracle
from .schemas import MetaResponse, QueryRequest, QueryResponse, StatsResponse


def create_app(model) -> FastAPI:
    """``model`` is a ±1 label vector or a :class:`~fairaudit.gaussian.LinearModel`."""
    oracle = model if isinstance(model, CountingOracle) else CountingOracle(model)
    app = FastAPI(title="fairaudit model server")
    app.state.oracle = oracle

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest):
        x = req.x
        if (oracle.kind == "finite") != isinstance(x, int):
            raise HTTPException(422, f"{oracle.kind} model expects " + ("an id" if oracle.kind == "finite" else "a vector"))
        try:
            return QueryResponse(label=oracle.query(x))
        except InvalidInput as exc:
            raise HTTPException(422, str(exc)) from None

    @app.get("/meta", response_model=MetaResponse)
    def meta():
        return MetaResponse(kind=oracle.kind, m=oracle.m, d=oracle.d)

    @app.get("/stats", response_model=StatsResponse)
    def stats():
        return StatsResponse(queries=oracle.count)

    return app


def serve(model, host="127.0.0.1", port=8000):
    import uvicorn

    uvicorn.run(create_app(model), host=host, port=port, log_level="warning")
