"""Instance API routes."""
import json
from fastapi import APIRouter, File, HTTPException, UploadFile
from annealing.encoding import builtin_instance, dump_instance, verify_instance
from annealing.exceptions import InstanceError
from backend.services.experiment_service import experiment_service

router = APIRouter()


def _builtin(omega: int, weighted: bool):
    try:
        return builtin_instance(omega, weighted=weighted)
    except InstanceError as e:
        raise HTTPException(status_code=404, detail=str(e))


@router.get("/{omega}")
async def get_instance(omega: int, weighted: bool = True):
    """
    Get a built-in instance in the JSON instance format.

    Args:
        omega: Built-in integer to factor
        weighted: Use the gap-widening equation weights

    Returns:
        Instance document
    """
    inst = _builtin(omega, weighted)
    return json.loads(dump_instance(inst))


@router.get("/{omega}/verify")
async def verify(omega: int, weighted: bool = True):
    """
    Brute-force verification report of a built-in instance.

    Args:
        omega: Built-in integer to factor
        weighted: Use the gap-widening equation weights

    Returns:
        Verification report
    """
    inst = _builtin(omega, weighted)
    try:
        return verify_instance(inst).to_dict()
    except InstanceError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/upload")
async def upload_instance(file: UploadFile = File(...)):
    """
    Upload an instance JSON file.

    Args:
        file: Instance document

    Returns:
        Stored path and verification report
    """
    try:
        contents = await file.read()
        inst, path, report = experiment_service.save_instance(contents.decode("utf-8"), file.filename)
        return {
            "message": "Instance uploaded successfully",
            "label": inst.label,
            "path": str(path),
            "report": report.to_dict(),
        }
    except (InstanceError, UnicodeDecodeError) as e:
        raise HTTPException(
            status_code=400,
            detail=f"Invalid instance file: {str(e)}"
        )
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(
            status_code=500,
            detail=f"Upload failed: {str(e)}"
        )
