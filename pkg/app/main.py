import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.config import LOG_LEVEL

# 모듈별 라우터 임포트
from app.modules.analysis.router import router as analysis_router

logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

app = FastAPI(
    title="ReLU Feedback Stability API",
    version=__version__,
    description="ReLU 피드백 시스템의 안정성 증명서 / 불안정 ray witness 계산 API"
)

# CORS 설정
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# 라우터 등록
app.include_router(analysis_router)


@app.get("/")
def health_check():
    return {"status": "ok", "message": "relu-stability server is running", "version": __version__}
