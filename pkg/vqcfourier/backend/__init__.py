# Backend Module 