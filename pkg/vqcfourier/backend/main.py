from fastapi import FastAPI, UploadFile, File, HTTPException, Query
import logging
import math
from typing import Dict, Any

from ..shared.errors import ConfigError, NumericalError
from .analysis import BoundInputs, bound_rff_kernel, bound_samples_grid, bound_samples_krr, bound_samples_pauli, failure_probability
from .datasets import clean_table, load_table, prepare_dataset, summarize_table
from .rff import FeatureMap, fit_closed_form, mse, predict
from .sampling import SamplingConfig, Strategy, default_omega_max, draw
from .spectrum import EncodingLayout, build_spectrum, layout_from_dict, spectrum_size, variance_sigma_p

logger = logging.getLogger(__name__)

app = FastAPI(title="VQC Fourier API", version="1.0.0")


def _http_error(e: Exception, action: str) -> HTTPException:
    """ConfigError -> 400, NumericalError -> 422, anything else -> 500"""
    if isinstance(e, HTTPException):
        return e
    if isinstance(e, ConfigError):
        return HTTPException(status_code=400, detail=f"Error {action}: {str(e)}")
    if isinstance(e, NumericalError):
        return HTTPException(status_code=422, detail=f"Error {action}: {str(e)}")
    logger.exception("Unexpected failure %s", action)
    return HTTPException(status_code=500, detail=f"Error {action}: {str(e)}")


@app.get("/health")
def health_check():
    return {"status": "ok", "message": "VQC Fourier API is running"}


@app.post("/spectrum")
def spectrum_endpoint(layout: Dict[str, Any]):
    """Spectrum sizes and second moments for an encoding layout"""
    try:
        encoding = layout_from_dict(layout)
        spectrum = build_spectrum(encoding)
        size = spectrum_size(encoding)
        return {
            "success": True,
            "distinct_per_dim": list(size.distinct_per_dim),
            "omega": size.total,
            "omega_plus": size.positive,
            "sigma_p": variance_sigma_p(spectrum),
            "sigma_p_weighted": variance_sigma_p(spectrum, weighted=True),
        }
    except Exception as e:
        raise _http_error(e, "computing spectrum")


@app.post("/bound")
def bound_endpoint(request: Dict[str, Any]):
    """Sample-complexity bounds: kind is kernel, krr, pauli or grid"""
    try:
        kind = str(request.get("kind", "pauli"))
        inputs = BoundInputs.from_dict(request)
        if kind == "kernel":
            if "D" not in request:
                raise ConfigError("kernel bound needs D")
            D = float(request["D"])
            return {"success": True, "kind": kind, "bound": bound_rff_kernel(inputs, D),
                    "probability": failure_probability(inputs, D)}
        calculators = {"krr": bound_samples_krr, "pauli": bound_samples_pauli, "grid": bound_samples_grid}
        if kind not in calculators:
            raise ConfigError(f"unknown bound kind {kind!r}")
        return {"success": True, "kind": kind, **calculators[kind](inputs).to_dict()}
    except Exception as e:
        raise _http_error(e, "computing bound")


@app.post("/upload")
async def upload_file(file: UploadFile = File(...)):
    """Upload CSV or Excel file and return the cleaned table summary"""
    try:
        content = await file.read()
        df_cleaned = clean_table(load_table(content, file.filename))
        return {"success": True, "summary": {"filename": file.filename, **summarize_table(df_cleaned)}}
    except Exception as e:
        raise _http_error(e, "processing file")


@app.post("/fit")
async def fit_file(
    file: UploadFile = File(...),
    L: int = Query(1, ge=1),
    strategy: Strategy = Query(Strategy.DISTINCT),
    D: int = Query(16, ge=1),
    seed: int = Query(0, ge=0),
    lambda0: float = Query(1e-6, ge=0),
    n_components: int = Query(5, ge=1),
):
    """Fit an RFF model with a Pauli spectrum to an uploaded table"""
    try:
        content = await file.read()
        frame = clean_table(load_table(content, file.filename))
        data = prepare_dataset(frame, n_components=n_components)
        layout = EncodingLayout.pauli(L, data.d)
        spectrum = build_spectrum(layout)
        sampling = SamplingConfig(
            strategy=strategy,
            D=D,
            seed=seed,
            omega_max=default_omega_max(data.M, 2 * math.pi) if strategy is Strategy.GRID else None,
            step=1.0 if strategy is Strategy.GRID else None,
        )
        sample = draw(sampling, spectrum=spectrum, layout=layout, d=data.d)
        model = fit_closed_form(FeatureMap.from_sample(sample), data, lambda0)
        return {
            "success": True,
            "rows": data.M,
            "d": data.d,
            "train_mse": mse(predict(model, data.inputs), data.targets),
            "model": model.to_dict(),
        }
    except Exception as e:
        raise _http_error(e, "fitting model")


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="localhost", port=8000)
